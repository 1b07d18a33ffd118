use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::process::Command;

use rkns_core::stage_system::RunStatistics;
use serde::Serialize;

use crate::{w_mode_name, BenchError, DiagMode, ProblemKind, Result, RunConfig};

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub problem: ProblemKind,
    pub family: String,
    pub stages: usize,
    pub level: u32,
    pub nu: f64,
    pub gamma: f64,
    pub n_steps: usize,
    pub w_mode: String,
    pub diag_solve: DiagMode,
    pub lps: bool,
    /// `s (n_free + n_p)`, the size of the stage system with the pinned
    /// pressure row counted.
    pub dofs: usize,
    /// Average FGMRES iterations per Newton iteration.
    pub avg_linear_its: f64,
    /// Average Newton iterations per time step.
    pub avg_newton_its: f64,
    /// Wall-clock seconds per FGMRES iteration, linear solves only.
    pub cpu_per_linear_it: f64,
    /// Wall-clock seconds per time step.
    pub cpu_per_step: f64,
    pub u_error: Option<f64>,
    pub p_error: Option<f64>,
    pub max_divergence: f64,
    /// FGMRES solves that hit the iteration limit.
    pub unconverged_solves: usize,
}

impl ResultRow {
    pub fn new(
        cfg: &RunConfig,
        n_steps: usize,
        lps: bool,
        dofs: usize,
        stats: &RunStatistics,
        errors: Option<(f64, f64)>,
    ) -> Self {
        let timing = |v: f64| if cfg.record_timings { v } else { 0.0 };
        Self {
            problem: cfg.problem,
            family: cfg.family.name().to_string(),
            stages: cfg.stages,
            level: cfg.level,
            nu: cfg.nu,
            gamma: cfg.gamma,
            n_steps,
            w_mode: w_mode_name(cfg.w_mode).to_string(),
            diag_solve: cfg.diag,
            lps,
            dofs,
            avg_linear_its: stats.avg_linear_per_newton(),
            avg_newton_its: stats.avg_newton_per_step(),
            cpu_per_linear_it: timing(stats.cpu_per_linear_iteration()),
            cpu_per_step: timing(stats.cpu_per_step()),
            u_error: errors.map(|e| e.0),
            p_error: errors.map(|e| e.1),
            max_divergence: stats.max_divergence,
            unconverged_solves: stats.unconverged_linear,
        }
    }

    fn record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(format_sci).unwrap_or_default();
        vec![
            self.problem.to_string(),
            self.family.clone(),
            self.stages.to_string(),
            self.level.to_string(),
            format_sci(self.nu),
            format_sci(self.gamma),
            self.n_steps.to_string(),
            self.w_mode.clone(),
            self.diag_solve.to_string(),
            if self.lps { "on" } else { "off" }.to_string(),
            self.dofs.to_string(),
            format_sci(self.avg_linear_its),
            format_sci(self.avg_newton_its),
            format_sci(self.cpu_per_linear_it),
            format_sci(self.cpu_per_step),
            opt(self.u_error),
            opt(self.p_error),
            format_sci(self.max_divergence),
            self.unconverged_solves.to_string(),
        ]
    }
}

pub const CSV_HEADER: [&str; 19] = [
    "problem",
    "family",
    "s",
    "l",
    "nu",
    "gamma",
    "nt",
    "w_mode",
    "diag_solve",
    "lps",
    "dofs",
    "it",
    "nit",
    "cpu_per_linear_it",
    "cpu_per_step",
    "u_error",
    "p_error",
    "max_div",
    "unconverged",
];

/// C-style `%.6e`: six fractional digits and a signed exponent of at least
/// two digits.
pub fn format_sci(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}").to_lowercase();
    }
    let s = format!("{x:.6e}");
    let (mant, exp) = s.split_once('e').expect("exponent in scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", exp.abs())
}

fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        a.stages
            .cmp(&b.stages)
            .then(a.level.cmp(&b.level))
            .then(a.nu.total_cmp(&b.nu))
            .then(a.gamma.total_cmp(&b.gamma))
    });
}

/// Rows sorted by `(s, l, nu, gamma)` as CSV.
pub fn write_csv<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut rows = rows.to_vec();
    sort_rows(&mut rows);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn git_revision() -> String {
    Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".to_string())
}

#[derive(Serialize)]
struct Environment {
    os: &'static str,
    arch: &'static str,
    cpus: usize,
    package_version: &'static str,
}

#[derive(Serialize)]
struct Summary<'a> {
    git_revision: String,
    environment: Environment,
    rows: &'a [ResultRow],
}

pub fn write_json<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut rows = rows.to_vec();
    sort_rows(&mut rows);
    let summary = Summary {
        git_revision: git_revision(),
        environment: Environment {
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            cpus: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            package_version: env!("CARGO_PKG_VERSION"),
        },
        rows: &rows,
    };
    serde_json::to_writer_pretty(out, &summary)?;
    Ok(())
}

/// Writes `<stem>.csv` and `<stem>.json`.
pub fn emit_results(rows: &[ResultRow], stem: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(BenchError::Config("no results to write".into()));
    }
    if let Some(dir) = stem.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_csv(File::create(stem.with_extension("csv"))?, rows)?;
    let mut json = File::create(stem.with_extension("json"))?;
    write_json(&mut json, rows)?;
    writeln!(json)?;
    Ok(())
}
