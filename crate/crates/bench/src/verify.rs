//! Dense algebraic checks on small instances: the preconditioner identities,
//! consistent initial data, the tableaux and the Newton Jacobian. Used by
//! the `verify` subcommand and the acceptance suite.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rkns_core::al_precond::{
    factorization_identity_error, kronecker_collapse_error, verify_smw_identity, AugmentationParams, AugmentedSolver,
    PrecondConfig, PressureOperators, SchurMode, TriangularForm, VelocitySolve, WMode,
};
use rkns_core::fem::{build_mesh, project_solenoidal, Rectangle};
use rkns_core::fgmres::KrylovConfig;
use rkns_core::sparse::norm2;
use rkns_core::stage_system::{
    consistent_pressure, newton_solve, pressure_poisson_residual, Discretization, LinearSolver, NewtonConfig,
    ProblemSpec, StageBlocks, StageVector, StepContext, TimeState,
};
use rkns_core::{check_order_conditions, make_tableau, ButcherTableau, Family};

use crate::problems::{exact_velocity, manufactured_boundary_rate, manufactured_forcing_field, MANUFACTURED_NU, MANUFACTURED_T};
use crate::Result;

/// Outcome of one check: `value` is compared against `limit` with `<=`
/// unless `at_least` is set.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub at_least: bool,
    pub seconds: f64,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            at_least: false,
            seconds: 0.0,
        }
    }

    pub fn above(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            at_least: true,
            ..Self::below(name, value, limit)
        }
    }

    pub fn passed(&self) -> bool {
        if self.at_least {
            self.value >= self.limit
        } else {
            self.value <= self.limit
        }
    }

    fn timed(mut self, start: Instant) -> Self {
        self.seconds = start.elapsed().as_secs_f64();
        self
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let op = if self.at_least { ">=" } else { "<=" };
        write!(
            f,
            "{} {}: {} {op} {} ({:.2}s)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            crate::format_sci(self.value),
            crate::format_sci(self.limit),
            self.seconds
        )
    }
}

/// Discretization plus the manufactured problem at `t = 0` with the
/// solenoidal projection of the exact velocity as current state.
pub struct Instance {
    pub disc: Discretization,
    pub problem: ProblemSpec,
    pub tableau: ButcherTableau,
    pub state: TimeState,
}

impl Instance {
    pub fn new(level: u32, stages: usize, convection: bool) -> Result<Self> {
        let disc = Discretization::new(build_mesh(Rectangle::UNIT_SQUARE, level)?);
        let problem = ProblemSpec {
            nu: MANUFACTURED_NU,
            forcing: manufactured_forcing_field(MANUFACTURED_NU),
            boundary_rate: manufactured_boundary_rate(),
            t0: 0.0,
            t_final: MANUFACTURED_T,
            n_steps: 8,
            convection,
            lps: false,
        };
        let u = project_solenoidal(&disc.spaces, |x, y| exact_velocity(x, y, 0.0))?;
        let p = consistent_pressure(&disc, &u, &problem, 0.0)?;
        let tableau = make_tableau(Family::RadauIIA, stages)?;
        Ok(Self {
            disc,
            problem,
            tableau,
            state: TimeState { u, p, t: 0.0, n: 0 },
        })
    }

    pub fn context(&self) -> Result<StepContext<'_>> {
        Ok(StepContext::new(&self.disc, &self.problem, &self.tableau, &self.state)?)
    }

    /// Newton system at the initial guess.
    pub fn blocks(&self) -> Result<StageBlocks> {
        let ctx = self.context()?;
        Ok(ctx.assemble(&ctx.initial_guess())?.0)
    }
}

/// FGMRES iterations to a relative residual of `1e-10` with the exact
/// velocity block inverse and the dense Schur complement, Stokes, `l = 2`,
/// `s = 2`.
pub fn ideal_preconditioner_iterations() -> Result<usize> {
    let inst = Instance::new(2, 2, false)?;
    let blocks = inst.blocks()?;
    let cfg = PrecondConfig {
        params: AugmentationParams {
            gamma: 1.0,
            w_mode: WMode::DiagMp,
        },
        velocity: VelocitySolve::FullExact,
        schur: SchurMode::TrueDense,
        form: TriangularForm::Upper,
    };
    let krylov = KrylovConfig {
        rel_tol: 1e-10,
        abs_tol: 1e-300,
        max_iters: 50,
        ..KrylovConfig::default()
    };
    let rep = AugmentedSolver::new(&inst.disc, cfg, krylov)?.solve(&blocks)?;
    Ok(if rep.krylov.converged() { rep.krylov.iterations } else { usize::MAX })
}

/// Largest SMW error on `l = 2` for the given stage counts and a few `gamma`.
pub fn smw_error(stages: &[usize]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &s in stages {
        let inst = Instance::new(2, s, true)?;
        let blocks = inst.blocks()?;
        let ops = PressureOperators::new(&inst.disc, WMode::DiagMp)?;
        for gamma in [1.0, 100.0] {
            worst = worst.max(verify_smw_identity(&blocks, &ops, gamma)?);
        }
    }
    Ok(worst)
}

/// Largest of the Kronecker collapse and Schur factorization errors.
pub fn identity_errors(stages: &[usize]) -> Result<(f64, f64)> {
    let (mut kron, mut fact): (f64, f64) = (0.0, 0.0);
    for &s in stages {
        let inst = Instance::new(2, s, true)?;
        let blocks = inst.blocks()?;
        let ops = PressureOperators::new(&inst.disc, WMode::DiagMp)?;
        kron = kron.max(kronecker_collapse_error(&blocks, &ops, 1.0)?);
        kron = kron.max(kronecker_collapse_error(&blocks, &ops, 100.0)?);
        fact = fact.max(factorization_identity_error(&blocks)?);
    }
    Ok((kron, fact))
}

/// Worst `(|B u_0|, pressure Poisson residual)` of the manufactured initial
/// data over `levels`.
pub fn initial_data_errors(levels: impl IntoIterator<Item = u32>) -> Result<(f64, f64)> {
    let (mut div, mut res): (f64, f64) = (0.0, 0.0);
    for l in levels {
        let inst = Instance::new(l, 1, true)?;
        div = div.max(inst.disc.divergence_norm(&inst.state.u));
        res = res.max(pressure_poisson_residual(&inst.disc, &inst.state.u, &inst.state.p, &inst.problem, 0.0)?);
    }
    Ok((div, res))
}

/// Observed order of `tab` on `y' = -y`, `y(0) = 1` over `[0, 1]`: the
/// slope between the two finest step counts whose errors still sit well
/// above rounding.
pub fn richardson_order(tab: &ButcherTableau) -> f64 {
    let exact = (-1f64).exp();
    let errs: Vec<(usize, f64)> = (0..9)
        .map(|k| 1usize << k)
        .map(|n| (n, (tab.integrate_linear(-1.0, 1.0, 1.0, n) - exact).abs() / exact))
        .collect();
    let usable: Vec<_> = errs.windows(2).filter(|w| w[1].1 > 1e-12 && w[0].1 < 1e-2).collect();
    let w = usable.last().copied().unwrap_or(&errs[0..2]);
    (w[0].1 / w[1].1).log2()
}

/// Order conditions, stiff accuracy and observed order for every family
/// and `s <= 5`: `(worst residual, worst stiff-accuracy defect, worst order
/// deviation)`.
pub fn tableau_checks() -> Result<(f64, f64, f64)> {
    let (mut res, mut stiff, mut dev): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for family in Family::ALL {
        for s in 1..=5 {
            let Ok(tab) = make_tableau(family, s) else { continue };
            res = res.max(check_order_conditions(&tab, tab.order).max_residual);
            if family == Family::RadauIIA {
                let last = s - 1;
                for j in 0..s {
                    stiff = stiff.max((tab.a[(last, j)] - tab.b[j]).abs());
                }
                stiff = stiff.max((tab.c[last] - 1.0).abs());
            }
            dev = dev.max((richardson_order(&tab) - family.order(s) as f64).abs());
        }
    }
    Ok((res, stiff, dev))
}

/// Log-log slope of the forward-difference error of `J v` against the
/// residual of the Navier-Stokes stage system, over `eps = 1e-2 .. 1e-4`.
pub fn jacobian_fd_slope(seed: u64) -> Result<f64> {
    let inst = Instance::new(2, 2, true)?;
    let ctx = inst.context()?;
    let n = (ctx.disc.n_free(), ctx.disc.spaces.n_p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = ctx.initial_guess();
    let mut perturb = vec![0.0; y.stages() * (n.0 + n.1 - 1)];
    perturb.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    ctx.apply_correction(&mut y, &perturb);
    let r0 = ctx.residual(&y)?;
    let blocks = ctx.jacobian(&y, &r0)?;
    let v: Vec<f64> = (0..blocks.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut jv = vec![0.0; v.len()];
    blocks.apply(&v, &mut jv)?;
    let fd_error = |eps: f64| -> Result<f64> {
        let mut yp: StageVector = y.clone();
        ctx.apply_correction(&mut yp, &v.iter().map(|x| eps * x).collect::<Vec<_>>());
        let rp = ctx.residual(&yp)?;
        let d: Vec<f64> = rp.iter().zip(&r0).zip(&jv).map(|((a, b), j)| (a - b) / eps - j).collect();
        Ok(norm2(&d))
    };
    let (e1, e2) = (fd_error(1e-2)?, fd_error(1e-4)?);
    Ok((e1 / e2).log10() / 2.0)
}

/// Newton iterations for one step of the Stokes limit.
pub fn stokes_newton_iterations() -> Result<usize> {
    let inst = Instance::new(2, 2, false)?;
    let out = newton_solve(&inst.context()?, &LinearSolver::Direct, &NewtonConfig::default())?;
    Ok(out.iterations)
}

/// The full dense-oracle suite.
pub fn run_verification() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let t = Instant::now();
    out.push(Check::below("ideal preconditioner iterations", ideal_preconditioner_iterations()? as f64, 2.0).timed(t));
    let t = Instant::now();
    out.push(Check::below("SMW identity, s=1,2", smw_error(&[1, 2])?, 1e-9).timed(t));
    let t = Instant::now();
    let (kron, fact) = identity_errors(&[1, 2, 3])?;
    out.push(Check::below("Kronecker collapse, s=1..3", kron, 1e-11).timed(t));
    out.push(Check::below("Schur factorization, s=1..3", fact, 1e-11).timed(t));
    let t = Instant::now();
    let (div, res) = initial_data_errors(1..=4)?;
    out.push(Check::below("initial |B u0|, l<=4", div, 1e-8).timed(t));
    out.push(Check::below("pressure Poisson residual, l<=4", res, 1e-10).timed(t));
    let t = Instant::now();
    let (res, stiff, dev) = tableau_checks()?;
    out.push(Check::below("order conditions, s<=5", res, 1e-13).timed(t));
    out.push(Check::below("Radau IIA stiff accuracy", stiff, 1e-13).timed(t));
    out.push(Check::below("observed order deviation", dev, 0.2).timed(t));
    let t = Instant::now();
    out.push(Check::above("Jacobian finite-difference slope", jacobian_fd_slope(3)?, 0.9).timed(t));
    let t = Instant::now();
    out.push(Check::below("Stokes Newton iterations", stokes_newton_iterations()? as f64, 1.0).timed(t));
    Ok(out)
}

/// Stage-system dimension counted as in the results table, `s (n_free + n_p)`.
pub fn reported_dofs(disc: &Discretization, stages: usize) -> usize {
    stages * (disc.n_free() + disc.spaces.n_p)
}
