use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use log::info;
use rkns_core::al_precond::{AugmentationParams, AugmentedSolver, DiagSolve, GsConfig, PrecondConfig, SchurMode, TriangularForm, VelocitySolve};
use rkns_core::fem::{build_mesh, interpolate_pressure, interpolate_velocity, project_solenoidal, Rectangle};
use rkns_core::fgmres::KrylovConfig;
use rkns_core::sparse::dot;
use rkns_core::stage_system::{
    consistent_pressure, time_loop, write_snapshot, Discretization, LinearSolver, ProblemSpec, TimeLoopOptions, TimeState,
};
use rkns_core::make_tableau;

use crate::output::ResultRow;
use crate::problems::{
    cavity_boundary_rate, exact_velocity, forcing_self_check, manufactured_boundary_rate, manufactured_forcing_field,
    zero_forcing,
};
use crate::{BenchError, DiagMode, ProblemKind, Result, RunConfig};

/// Largest manufactured residual accepted by the forcing self-check.
const FORCING_CHECK_TOL: f64 = 1e-6;

/// Step count with `dt = T / n_t <= h^{2 / q}` for the velocity mesh size
/// `h = 2^{-1-l}` and Runge-Kutta order `q`.
pub fn auto_steps(level: u32, order: usize, t_final: f64) -> usize {
    let h = 0.5f64.powi(level as i32 + 1);
    let dt_max = h.powf(2.0 / order as f64);
    ((t_final / dt_max - 1e-9).ceil() as usize).max(1)
}

/// `(||u - u_h||_{K_u}, ||p - p_h||_{M_p})` at one state, against the nodal
/// interpolants of the exact fields; both pressures are shifted to zero mean.
pub fn state_errors(
    disc: &Discretization,
    state: &TimeState,
    exact_u: impl Fn(f64, f64) -> [f64; 2],
    exact_p: impl Fn(f64, f64) -> f64,
) -> (f64, f64) {
    let sp = &disc.spaces;
    let ue = interpolate_velocity(sp, exact_u);
    let eu: Vec<f64> = state.u.iter().zip(&ue).map(|(a, b)| a - b).collect();
    let pe = disc.zero_mean(&interpolate_pressure(sp, exact_p));
    let ph = disc.zero_mean(&state.p);
    let ep: Vec<f64> = ph.iter().zip(&pe).map(|(a, b)| a - b).collect();
    (
        dot(&eu, &disc.stiff_u.apply(&eu)).max(0.0).sqrt(),
        dot(&ep, &disc.mass_p.apply(&ep)).max(0.0).sqrt(),
    )
}

/// Maximum over the snapshots of [`state_errors`].
pub fn compute_errors(
    disc: &Discretization,
    snapshots: &[TimeState],
    exact_u: impl Fn(f64, f64, f64) -> [f64; 2],
    exact_p: impl Fn(f64, f64, f64) -> f64,
) -> (f64, f64) {
    snapshots.iter().fold((0.0, 0.0), |(mu, mp), st| {
        let (eu, ep) = state_errors(disc, st, |x, y| exact_u(x, y, st.t), |x, y| exact_p(x, y, st.t));
        (f64::max(mu, eu), f64::max(mp, ep))
    })
}

pub fn precond_config(cfg: &RunConfig) -> PrecondConfig {
    let diag = match cfg.diag {
        DiagMode::Exact => DiagSolve::ExactLu,
        DiagMode::Inexact => DiagSolve::InexactIluGmres {
            iterations: cfg.inexact_iterations,
        },
    };
    PrecondConfig {
        params: AugmentationParams {
            gamma: cfg.gamma,
            w_mode: cfg.w_mode,
        },
        velocity: VelocitySolve::GaussSeidel(GsConfig { sweeps: 1, diag }),
        schur: SchurMode::Approximate,
        form: TriangularForm::Upper,
    }
}

pub fn krylov_config(cfg: &RunConfig) -> KrylovConfig {
    KrylovConfig {
        rel_tol: cfg.krylov_rel_tol,
        abs_tol: cfg.krylov_abs_tol,
        max_iters: cfg.krylov_max_iters,
        ..KrylovConfig::default()
    }
}

pub fn run(cfg: &RunConfig) -> Result<ResultRow> {
    match cfg.problem {
        ProblemKind::Accuracy => run_accuracy(cfg),
        ProblemKind::Cavity => run_cavity(cfg),
    }
}

pub fn run_accuracy(cfg: &RunConfig) -> Result<ResultRow> {
    if cfg.problem != ProblemKind::Accuracy {
        return Err(BenchError::Config("run_accuracy needs an accuracy configuration".into()));
    }
    let check = forcing_self_check(cfg.nu, 10, cfg.seed);
    if check >= FORCING_CHECK_TOL {
        return Err(BenchError::Config(format!("manufactured forcing fails its self-check ({check:e})")));
    }
    let disc = Discretization::new(build_mesh(Rectangle::UNIT_SQUARE, cfg.level)?);
    let u0 = project_solenoidal(&disc.spaces, |x, y| exact_velocity(x, y, 0.0))?;
    let problem = problem_spec(cfg, manufactured_forcing_field(cfg.nu), manufactured_boundary_rate())?;
    execute(cfg, disc, problem, u0, true)
}

pub fn run_cavity(cfg: &RunConfig) -> Result<ResultRow> {
    if cfg.problem != ProblemKind::Cavity {
        return Err(BenchError::Config("run_cavity needs a cavity configuration".into()));
    }
    let disc = Discretization::new(build_mesh(Rectangle::REFERENCE_SQUARE, cfg.level)?);
    let u0 = vec![0.0; disc.spaces.n_u];
    let problem = problem_spec(cfg, zero_forcing(), cavity_boundary_rate())?;
    execute(cfg, disc, problem, u0, false)
}

/// Steps actually used by a configuration.
pub fn resolve_steps(cfg: &RunConfig) -> Result<usize> {
    let order = cfg.family.order(cfg.stages);
    let n = cfg.n_steps.unwrap_or_else(|| auto_steps(cfg.level, order, cfg.t_final));
    if n == 0 {
        return Err(BenchError::Config("number of time steps must be positive".into()));
    }
    // the lid stops accelerating at t = 1, which must fall on a step boundary
    if cfg.problem == ProblemKind::Cavity && cfg.n_steps.is_none() && n % 2 == 1 {
        return Ok(n + 1);
    }
    Ok(n)
}

fn problem_spec(
    cfg: &RunConfig,
    forcing: rkns_core::stage_system::VectorField,
    rate: rkns_core::stage_system::BoundaryRate,
) -> Result<ProblemSpec> {
    cfg.validate()?;
    Ok(ProblemSpec {
        nu: cfg.nu,
        forcing,
        boundary_rate: rate,
        t0: 0.0,
        t_final: cfg.t_final,
        n_steps: resolve_steps(cfg)?,
        convection: true,
        lps: cfg.lps_enabled(),
    })
}

fn snapshot(dir: &Path, level: u32, state: &TimeState) -> Result<()> {
    for (field, values) in [("u", &state.u), ("p", &state.p)] {
        let path = dir.join(format!("{field}_{:05}.txt", state.n));
        write_snapshot(BufWriter::new(File::create(path)?), level, field, state.t, values)?;
    }
    Ok(())
}

fn execute(cfg: &RunConfig, disc: Discretization, problem: ProblemSpec, u0: Vec<f64>, exact: bool) -> Result<ResultRow> {
    let tableau = make_tableau(cfg.family, cfg.stages)?;
    let p0 = consistent_pressure(&disc, &u0, &problem, 0.0)?;
    let initial = TimeState {
        u: u0,
        p: p0,
        t: 0.0,
        n: 0,
    };
    let solver = AugmentedSolver::new(&disc, precond_config(cfg), krylov_config(cfg))?;
    let solver = LinearSolver::Augmented(Box::new(solver));
    if let Some(dir) = &cfg.snapshot_dir {
        std::fs::create_dir_all(dir)?;
    }
    info!(
        "{} s={} l={} nu={:.3e} gamma={} n_t={} lps={}",
        cfg.problem, cfg.stages, cfg.level, cfg.nu, cfg.gamma, problem.n_steps, problem.lps
    );
    let mut errors = (0.0f64, 0.0f64);
    let mut io_error = None;
    let opts = TimeLoopOptions {
        newton: cfg.newton,
        keep_snapshots: false,
    };
    let traj = time_loop(&disc, &problem, &tableau, initial, &solver, &opts, |st| {
        if exact {
            let (eu, ep) = state_errors(&disc, st, |x, y| exact_velocity(x, y, st.t), |_, _| 0.0);
            errors = (errors.0.max(eu), errors.1.max(ep));
        }
        if let Some(dir) = &cfg.snapshot_dir {
            if let Err(e) = snapshot(dir, cfg.level, st) {
                io_error.get_or_insert(e);
            }
        }
        Ok(())
    })?;
    if let Some(e) = io_error {
        return Err(e);
    }
    let dofs = crate::verify::reported_dofs(&disc, cfg.stages);
    Ok(ResultRow::new(cfg, problem.n_steps, problem.lps, dofs, &traj.stats, exact.then_some(errors)))
}
