//! Experiment harness for the Runge-Kutta Navier-Stokes solver: the
//! manufactured accuracy test, the lid-driven cavity, result files and a
//! suite of dense algebraic checks.

pub mod output;
pub mod problems;
pub mod runner;
pub mod sweep;
pub mod verify;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rkns_core::al_precond::WMode;
use rkns_core::stage_system::NewtonConfig;
use rkns_core::Family;
use serde::Serialize;

pub use output::{emit_results, format_sci, ResultRow};
pub use runner::{auto_steps, compute_errors, run, run_accuracy, run_cavity, state_errors};
pub use sweep::parse_sweep;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] rkns_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0} verification checks failed")]
    Verification(usize),
}

impl BenchError {
    /// 2 for solver divergence, 3 for configuration errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::Solver(rkns_core::Error::Config(_)) => 3,
            BenchError::Solver(rkns_core::Error::NewtonDiverged { .. }) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Accuracy,
    Cavity,
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::Accuracy => "accuracy",
            ProblemKind::Cavity => "cavity",
        })
    }
}

impl FromStr for ProblemKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "accuracy" => Ok(ProblemKind::Accuracy),
            "cavity" => Ok(ProblemKind::Cavity),
            _ => Err(BenchError::Config(format!("unknown problem '{s}'"))),
        }
    }
}

/// Solver for the diagonal blocks of the Gauss-Seidel sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagMode {
    Exact,
    Inexact,
}

impl fmt::Display for DiagMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiagMode::Exact => "exact",
            DiagMode::Inexact => "inexact",
        })
    }
}

impl FromStr for DiagMode {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(DiagMode::Exact),
            "inexact" => Ok(DiagMode::Inexact),
            _ => Err(BenchError::Config(format!("unknown diagonal solve '{s}' (exact|inexact)"))),
        }
    }
}

pub fn parse_w_mode(s: &str) -> Result<WMode> {
    match s.to_ascii_lowercase().as_str() {
        "diag" | "diagmp" | "diag-mp" => Ok(WMode::DiagMp),
        "full" | "fullmp" | "full-mp" => Ok(WMode::FullMp),
        _ => Err(BenchError::Config(format!("unknown W mode '{s}' (diag|full)"))),
    }
}

pub fn w_mode_name(w: WMode) -> &'static str {
    match w {
        WMode::DiagMp => "diag",
        WMode::FullMp => "full",
    }
}

pub fn parse_family(s: &str) -> Result<Family> {
    s.parse::<Family>().map_err(|e| BenchError::Config(e.to_string()))
}

pub fn parse_on_off(s: &str) -> Result<bool> {
    match s.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(BenchError::Config(format!("expected on|off, got '{s}'"))),
    }
}

/// One experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub family: Family,
    pub stages: usize,
    pub level: u32,
    pub nu: f64,
    pub gamma: f64,
    pub t_final: f64,
    /// `None` selects the step-size rule.
    pub n_steps: Option<usize>,
    pub w_mode: WMode,
    pub diag: DiagMode,
    /// Fixed GMRES iterations per inexact diagonal solve.
    pub inexact_iterations: usize,
    /// `None`: off for the accuracy test, on for the cavity when `nu <= 1/100`.
    pub lps: Option<bool>,
    pub newton: NewtonConfig,
    pub krylov_rel_tol: f64,
    pub krylov_abs_tol: f64,
    pub krylov_max_iters: usize,
    pub seed: u64,
    /// `false` writes zero CPU columns so repeated runs give identical files.
    pub record_timings: bool,
    /// Directory for per-step velocity and pressure snapshots.
    pub snapshot_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn accuracy(stages: usize, level: u32, gamma: f64) -> Self {
        Self {
            problem: ProblemKind::Accuracy,
            family: Family::RadauIIA,
            stages,
            level,
            nu: problems::MANUFACTURED_NU,
            gamma,
            t_final: problems::MANUFACTURED_T,
            n_steps: None,
            w_mode: WMode::DiagMp,
            diag: DiagMode::Exact,
            inexact_iterations: 10,
            lps: None,
            // must sit above what FGMRES can resolve with `krylov_abs_tol`
            newton: NewtonConfig {
                abs_tol: 1e-9,
                ..NewtonConfig::default()
            },
            krylov_rel_tol: 1e-6,
            krylov_abs_tol: 1e-10,
            krylov_max_iters: 500,
            seed: 0,
            record_timings: true,
            snapshot_dir: None,
        }
    }

    pub fn cavity(stages: usize, level: u32, nu: f64, gamma: f64) -> Self {
        Self {
            problem: ProblemKind::Cavity,
            nu,
            t_final: problems::CAVITY_T,
            ..Self::accuracy(stages, level, gamma)
        }
    }

    pub fn lps_enabled(&self) -> bool {
        self.lps.unwrap_or(match self.problem {
            ProblemKind::Accuracy => false,
            ProblemKind::Cavity => self.nu <= 1.0 / 100.0 + 1e-15,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Config(m));
        if !(1..=5).contains(&self.stages) {
            return bad(format!("stages must be in 1..=5, got {}", self.stages));
        }
        if !(1..=8).contains(&self.level) {
            return bad(format!("level must be in 1..=8, got {}", self.level));
        }
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return bad(format!("viscosity must be positive, got {}", self.nu));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return bad(format!("gamma must be non-negative, got {}", self.gamma));
        }
        if !(self.t_final > 0.0) {
            return bad(format!("final time must be positive, got {}", self.t_final));
        }
        if self.family == Family::LobattoIIIC && self.stages < 2 {
            return bad("Lobatto IIIC needs at least two stages".into());
        }
        if self.newton.max_iters == 0 || !(self.newton.rel_tol > 0.0) || !(self.newton.abs_tol > 0.0) {
            return bad("Newton tolerances and iteration limit must be positive".into());
        }
        if !(self.krylov_rel_tol > 0.0) || !(self.krylov_abs_tol > 0.0) || self.krylov_max_iters == 0 {
            return bad("Krylov tolerances and iteration limit must be positive".into());
        }
        if self.diag == DiagMode::Inexact && self.inexact_iterations == 0 {
            return bad("inexact diagonal solves need at least one iteration".into());
        }
        Ok(())
    }
}
