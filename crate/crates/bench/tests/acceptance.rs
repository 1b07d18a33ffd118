//! Acceptance suite: one PASS/FAIL line per criterion. Failing criteria are
//! reported but do not fail the process unless `RKNS_ACCEPTANCE_STRICT` is
//! set, so the rest of the workspace tests still run.

use std::time::Instant;

use rkns_bench::verify::{
    identity_errors, ideal_preconditioner_iterations, initial_data_errors, jacobian_fd_slope, smw_error,
    stokes_newton_iterations, tableau_checks,
};
use rkns_bench::{run, DiagMode, ResultRow, RunConfig};

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }

    fn error(e: impl std::fmt::Display) -> Self {
        Self::new(false, format!("error: {e}"))
    }
}

fn within_factor(value: f64, reference: f64, factor: f64) -> bool {
    value <= reference * factor && value >= reference / factor
}

fn run_row(cfg: RunConfig) -> Result<ResultRow, String> {
    run(&RunConfig {
        record_timings: true,
        ..cfg
    })
    .map_err(|e| e.to_string())
}

fn ideal_two_step() -> Outcome {
    let start = Instant::now();
    match ideal_preconditioner_iterations() {
        Ok(its) => {
            let secs = start.elapsed().as_secs_f64();
            Outcome::new(its <= 2 && secs < 5.0, format!("{its} iterations to 1e-10, {secs:.2}s"))
        }
        Err(e) => Outcome::error(e),
    }
}

fn smw() -> Outcome {
    let start = Instant::now();
    match smw_error(&[1, 2]) {
        Ok(err) => {
            let secs = start.elapsed().as_secs_f64();
            Outcome::new(err < 1e-9 && secs < 10.0, format!("max error {err:.2e} (< 1e-9), {secs:.2}s"))
        }
        Err(e) => Outcome::error(e),
    }
}

fn kronecker_and_factorization() -> Outcome {
    let start = Instant::now();
    match identity_errors(&[1, 2, 3]) {
        Ok((kron, fact)) => {
            let secs = start.elapsed().as_secs_f64();
            Outcome::new(
                kron < 1e-11 && fact < 1e-11 && secs < 10.0,
                format!("collapse {kron:.2e}, factorization {fact:.2e} (< 1e-11), {secs:.2}s"),
            )
        }
        Err(e) => Outcome::error(e),
    }
}

struct AccuracyRows {
    gamma1: Vec<ResultRow>,
    gamma100: Vec<ResultRow>,
}

fn accuracy_rows() -> Result<AccuracyRows, String> {
    let rows = |gamma: f64| -> Result<Vec<ResultRow>, String> {
        (2..=4).map(|l| run_row(RunConfig::accuracy(2, l, gamma))).collect()
    };
    Ok(AccuracyRows {
        gamma1: rows(1.0)?,
        gamma100: rows(100.0)?,
    })
}

fn accuracy_table(rows: &Result<AccuracyRows, String>) -> Outcome {
    let rows = match rows {
        Ok(r) => r,
        Err(e) => return Outcome::error(e),
    };
    let u_ref = [1.46e0, 7.50e-1, 7.24e-2];
    let it1_ref = [13.0, 13.0, 12.0];
    let it100_ref = [8.0, 8.0, 7.0];
    let mut ok = true;
    let mut parts = Vec::new();
    for k in 0..3 {
        let (a, b) = (&rows.gamma1[k], &rows.gamma100[k]);
        let u = a.u_error.unwrap_or(f64::NAN);
        let u_ok = within_factor(u, u_ref[k], 2.0);
        let it1_ok = (a.avg_linear_its - it1_ref[k]).abs() <= 5.0;
        let it100_ok = (b.avg_linear_its - it100_ref[k]).abs() <= 4.0 && b.avg_linear_its <= a.avg_linear_its;
        ok &= u_ok && it1_ok && it100_ok;
        parts.push(format!(
            "l={}: u {:.2e}/{:.2e}{} it {:.1}/{}{} it100 {:.1}/{}{}",
            a.level,
            u,
            u_ref[k],
            if u_ok { "" } else { "!" },
            a.avg_linear_its,
            it1_ref[k],
            if it1_ok { "" } else { "!" },
            b.avg_linear_its,
            it100_ref[k],
            if it100_ok { "" } else { "!" },
        ));
    }
    Outcome::new(ok, parts.join("; "))
}

fn convergence_order(rows: &Result<AccuracyRows, String>) -> Outcome {
    let rows = match rows {
        Ok(r) => r,
        Err(e) => return Outcome::error(e),
    };
    let e3 = rows.gamma1[1].u_error.unwrap_or(f64::NAN);
    let e4 = rows.gamma1[2].u_error.unwrap_or(f64::NAN);
    let rate = (e3 / e4).log2();
    let s4 = match run_row(RunConfig::accuracy(4, 4, 1.0)) {
        Ok(r) => r.u_error.unwrap_or(f64::NAN),
        Err(e) => return Outcome::error(e),
    };
    Outcome::new(
        rate >= 2.0 && within_factor(s4, 9.08e-3, 2.0),
        format!("s=2 rate l3->l4 {rate:.2} (>= 2); s=4 l=4 u {s4:.2e} vs 9.08e-03 (x2)"),
    )
}

fn cavity_robustness() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for s in [2, 3] {
        for nu in [1.0 / 100.0, 1.0 / 500.0] {
            let mut its = Vec::new();
            for l in [3, 4] {
                match run_row(RunConfig::cavity(s, l, nu, 1.0)) {
                    Ok(r) => {
                        ok &= r.avg_linear_its <= 25.0 && r.avg_newton_its <= 9.0 && r.unconverged_solves == 0;
                        parts.push(format!(
                            "s={s} l={l} nu=1/{:.0}: it {:.1} Nit {:.1}",
                            1.0 / nu,
                            r.avg_linear_its,
                            r.avg_newton_its
                        ));
                        its.push(r.avg_linear_its);
                    }
                    Err(e) => return Outcome::error(e),
                }
            }
            let flat = its.iter().cloned().fold(f64::MIN, f64::max) / its.iter().cloned().fold(f64::MAX, f64::min);
            ok &= flat <= 1.5;
            parts.push(format!("flatness {flat:.2}"));
        }
    }
    Outcome::new(ok, parts.join("; "))
}

fn inexact_mode() -> Outcome {
    let cfg = |diag, l| RunConfig {
        diag,
        ..RunConfig::cavity(2, l, 1.0 / 100.0, 1.0)
    };
    let (exact, inexact, inexact4) =
        match (run_row(cfg(DiagMode::Exact, 3)), run_row(cfg(DiagMode::Inexact, 3)), run_row(cfg(DiagMode::Inexact, 4))) {
            (Ok(a), Ok(b), Ok(c)) => (a, b, c),
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => return Outcome::error(e),
        };
    let ratio = inexact.avg_linear_its / exact.avg_linear_its;
    let per_dof = |r: &ResultRow| r.cpu_per_linear_it / r.dofs as f64;
    let scaling = per_dof(&inexact4) / per_dof(&inexact);
    Outcome::new(
        ratio <= 3.0 && inexact.unconverged_solves == 0 && (0.5..=2.0).contains(&scaling),
        format!(
            "it exact {:.1}, inexact {:.1}, ratio {ratio:.2} (<= 3), unconverged {}; CPU per it per DoF l3->l4 x{scaling:.2}",
            exact.avg_linear_its, inexact.avg_linear_its, inexact.unconverged_solves
        ),
    )
}

fn consistent_initialization() -> Outcome {
    match initial_data_errors(1..=4) {
        Ok((div, res)) => Outcome::new(
            div < 1e-8 && res < 1e-10,
            format!("|B u0| {div:.2e} (< 1e-8), Poisson residual {res:.2e} (< 1e-10)"),
        ),
        Err(e) => Outcome::error(e),
    }
}

fn tableaux() -> Outcome {
    match tableau_checks() {
        Ok((res, stiff, dev)) => Outcome::new(
            res < 1e-13 && stiff < 1e-13 && dev <= 0.2,
            format!("order conditions {res:.2e}, stiff accuracy {stiff:.2e}, order deviation {dev:.3}"),
        ),
        Err(e) => Outcome::error(e),
    }
}

fn jacobian() -> Outcome {
    match (jacobian_fd_slope(3), stokes_newton_iterations()) {
        (Ok(slope), Ok(its)) => Outcome::new(
            slope >= 0.9 && its == 1,
            format!("finite-difference slope {slope:.3} (>= 0.9), Stokes Newton iterations {its}"),
        ),
        (Err(e), _) | (_, Err(e)) => Outcome::error(e),
    }
}

fn main() {
    let started = Instant::now();
    let report = |n: usize, name: &str, t: Instant, o: Outcome| {
        println!(
            "criterion {n:>2} {}: {name}: {} [{:.1}s]",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
        o.passed
    };
    let mut all = true;
    let t = Instant::now();
    all &= report(1, "ideal preconditioner two-step", t, ideal_two_step());
    let t = Instant::now();
    all &= report(2, "SMW identity", t, smw());
    let t = Instant::now();
    all &= report(3, "Kronecker collapse and factorization", t, kronecker_and_factorization());
    let t = Instant::now();
    let rows = accuracy_rows();
    all &= report(4, "accuracy table", t, accuracy_table(&rows));
    let t = Instant::now();
    all &= report(5, "convergence order", t, convergence_order(&rows));
    let t = Instant::now();
    all &= report(6, "cavity robustness", t, cavity_robustness());
    let t = Instant::now();
    all &= report(7, "inexact diagonal solves", t, inexact_mode());
    let t = Instant::now();
    all &= report(8, "consistent initialization", t, consistent_initialization());
    let t = Instant::now();
    all &= report(9, "tableau suite", t, tableaux());
    let t = Instant::now();
    all &= report(10, "Jacobian correctness", t, jacobian());
    println!("acceptance finished in {:.1}s", started.elapsed().as_secs_f64());
    if !all && std::env::var_os("RKNS_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
