use std::time::Instant;

use log::{debug, warn};

use super::{NewtonConfig, StageVector, StepContext};
use crate::al_precond::AugmentedSolver;
use crate::error::{Error, Result};
use crate::sparse::norm2;

/// How each Newton correction is computed.
#[derive(Debug, Clone)]
pub enum LinearSolver {
    /// Sparse LU of the whole stage system.
    Direct,
    /// Preconditioned FGMRES on the augmented system.
    Augmented(Box<AugmentedSolver>),
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub stages: StageVector,
    /// Linear solves performed.
    pub iterations: usize,
    /// Krylov iterations summed over all linear solves.
    pub linear_iterations: usize,
    /// Linear solves that stopped before reaching the Krylov tolerance.
    pub unconverged_linear: usize,
    pub linear_seconds: f64,
    /// Residual norm before each iteration and at the end.
    pub residuals: Vec<f64>,
    /// Worst relative residual of a correction in the unaugmented system.
    pub max_equivalence_residual: f64,
}

/// Newton's method on the stage equations of one step, started from the
/// boundary-lifted guess.
pub fn newton_solve(ctx: &StepContext<'_>, solver: &LinearSolver, cfg: &NewtonConfig) -> Result<NewtonOutcome> {
    let mut y = ctx.initial_guess();
    let mut out = NewtonOutcome {
        stages: StageVector::zeros(0, 0, 0),
        iterations: 0,
        linear_iterations: 0,
        unconverged_linear: 0,
        linear_seconds: 0.0,
        residuals: Vec::new(),
        max_equivalence_residual: 0.0,
    };
    let mut target = cfg.abs_tol;
    loop {
        let res = ctx.residual(&y)?;
        let norm = norm2(&res);
        out.residuals.push(norm);
        if out.iterations == 0 {
            target = target.max(cfg.rel_tol * norm);
        }
        debug!("step {} newton {}: |F| = {norm:.3e}", ctx.state.n, out.iterations);
        if norm <= target {
            break;
        }
        if out.iterations == cfg.max_iters || !norm.is_finite() {
            return Err(Error::NewtonDiverged {
                step: ctx.state.n,
                iterations: out.iterations,
                residual: norm,
            });
        }
        let blocks = ctx.jacobian(&y, &res)?;
        let start = Instant::now();
        let delta = match solver {
            LinearSolver::Direct => blocks.solve_direct()?,
            LinearSolver::Augmented(s) => {
                let rep = s.solve(&blocks)?;
                if !rep.krylov.converged() {
                    out.unconverged_linear += 1;
                    warn!(
                        "step {}: FGMRES stopped after {} iterations ({:?})",
                        ctx.state.n, rep.krylov.iterations, rep.krylov.reason
                    );
                }
                out.linear_iterations += rep.krylov.iterations;
                out.max_equivalence_residual = out.max_equivalence_residual.max(rep.original_residual);
                rep.x
            }
        };
        out.linear_seconds += start.elapsed().as_secs_f64();
        ctx.apply_correction(&mut y, &delta);
        out.iterations += 1;
    }
    out.stages = y;
    Ok(out)
}
