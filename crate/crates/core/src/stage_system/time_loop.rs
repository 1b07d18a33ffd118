use std::io::Write;
use std::time::Instant;

use log::info;

use super::{newton_solve, rk_update, Discretization, LinearSolver, NewtonConfig, ProblemSpec, StepContext, TimeState};
use crate::error::Result;
use crate::tableau::ButcherTableau;

/// Totals over a run; averages are derived on demand.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStatistics {
    pub steps: usize,
    pub newton_iterations: usize,
    pub linear_iterations: usize,
    pub unconverged_linear: usize,
    pub linear_seconds: f64,
    pub step_seconds: f64,
    /// Largest `||B u_n||` over accepted steps.
    pub max_divergence: f64,
    pub max_equivalence_residual: f64,
}

impl RunStatistics {
    pub fn avg_newton_per_step(&self) -> f64 {
        ratio(self.newton_iterations as f64, self.steps)
    }

    /// Average Krylov iterations per Newton iteration.
    pub fn avg_linear_per_newton(&self) -> f64 {
        ratio(self.linear_iterations as f64, self.newton_iterations)
    }

    pub fn cpu_per_linear_iteration(&self) -> f64 {
        ratio(self.linear_seconds, self.linear_iterations)
    }

    pub fn cpu_per_step(&self) -> f64 {
        ratio(self.step_seconds, self.steps)
    }
}

fn ratio(a: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        a / n as f64
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub final_state: TimeState,
    /// Initial state followed by every accepted step, when requested.
    pub snapshots: Vec<TimeState>,
    pub stats: RunStatistics,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TimeLoopOptions {
    pub newton: NewtonConfig,
    pub keep_snapshots: bool,
}

/// Runs `problem.n_steps` steps from `initial`; `on_step` sees every
/// accepted state, starting with the initial one.
pub fn time_loop(
    disc: &Discretization,
    problem: &ProblemSpec,
    tableau: &ButcherTableau,
    initial: TimeState,
    solver: &LinearSolver,
    opts: &TimeLoopOptions,
    mut on_step: impl FnMut(&TimeState) -> Result<()>,
) -> Result<Trajectory> {
    let mut stats = RunStatistics::default();
    let mut snapshots = Vec::new();
    on_step(&initial)?;
    if opts.keep_snapshots {
        snapshots.push(initial.clone());
    }
    let dt = problem.dt();
    let mut state = initial;
    for _ in 0..problem.n_steps {
        let start = Instant::now();
        let ctx = StepContext::new(disc, problem, tableau, &state)?;
        let outcome = newton_solve(&ctx, solver, &opts.newton)?;
        let next = rk_update(&state, &outcome.stages, tableau, dt);
        stats.step_seconds += start.elapsed().as_secs_f64();
        stats.steps += 1;
        stats.newton_iterations += outcome.iterations;
        stats.linear_iterations += outcome.linear_iterations;
        stats.unconverged_linear += outcome.unconverged_linear;
        stats.linear_seconds += outcome.linear_seconds;
        stats.max_equivalence_residual = stats.max_equivalence_residual.max(outcome.max_equivalence_residual);
        stats.max_divergence = stats.max_divergence.max(disc.divergence_norm(&next.u));
        info!(
            "step {} t={:.4}: {} Newton, {} Krylov",
            next.n, next.t, outcome.iterations, outcome.linear_iterations
        );
        on_step(&next)?;
        if opts.keep_snapshots {
            snapshots.push(next.clone());
        }
        state = next;
    }
    Ok(Trajectory {
        final_state: state,
        snapshots,
        stats,
    })
}

/// Text snapshot: a header line, the vector length, then one value per line.
pub fn write_snapshot<W: Write>(mut w: W, level: u32, field: &str, time: f64, values: &[f64]) -> Result<()> {
    writeln!(w, "# level={level} field={field} time={time:.17e}")?;
    writeln!(w, "{}", values.len())?;
    for v in values {
        writeln!(w, "{v:.17e}")?;
    }
    Ok(())
}
