use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rkns_bench::sweep::{apply_setting, defaults};
use rkns_bench::verify::run_verification;
use rkns_bench::{emit_results, parse_sweep, run, BenchError, ProblemKind, Result, RunConfig};

#[derive(Parser)]
#[command(name = "rkns-bench", version, about = "Runge-Kutta Navier-Stokes experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Manufactured solution on the unit square, with error norms.
    Accuracy(RunArgs),
    /// Lid-driven cavity on (-1, 1)^2, solver statistics only.
    Cavity(RunArgs),
    /// Dense-oracle identity suite on small instances.
    Verify,
    /// Runs every [run] block of a sweep file.
    Sweep {
        file: PathBuf,
        /// Output stem; `.csv` and `.json` are appended.
        #[arg(long, default_value = "results/sweep")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    stages: Option<usize>,
    #[arg(long)]
    level: Option<u32>,
    /// Viscosity; fractions such as 1/100 are accepted.
    #[arg(long)]
    nu: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    /// radau-iia, gauss or lobatto-iiic.
    #[arg(long)]
    tableau: Option<String>,
    /// Number of time steps, or `auto`.
    #[arg(long)]
    nt: Option<String>,
    /// diag or full.
    #[arg(long)]
    w_mode: Option<String>,
    /// exact or inexact.
    #[arg(long)]
    diag_solve: Option<String>,
    /// on, off or auto.
    #[arg(long)]
    lps: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write zero CPU columns so repeated runs give identical files.
    #[arg(long)]
    no_timings: bool,
    /// Directory for per-step snapshots.
    #[arg(long)]
    snapshots: Option<PathBuf>,
    /// Output stem; `.csv` and `.json` are appended.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self, problem: ProblemKind) -> Result<RunConfig> {
        let mut cfg = defaults(problem);
        let seed = self.seed.map(|s| s.to_string());
        let settings = [
            ("stages", self.stages.map(|s| s.to_string())),
            ("level", self.level.map(|l| l.to_string())),
            ("nu", self.nu.clone()),
            ("gamma", self.gamma.clone()),
            ("tableau", self.tableau.clone()),
            ("nt", self.nt.clone()),
            ("w_mode", self.w_mode.clone()),
            ("diag_solve", self.diag_solve.clone()),
            ("lps", self.lps.clone()),
            ("seed", seed),
        ];
        for (key, value) in settings {
            if let Some(v) = value {
                apply_setting(&mut cfg, key, &v)?;
            }
        }
        cfg.record_timings = !self.no_timings;
        cfg.snapshot_dir = self.snapshots.clone();
        cfg.validate()?;
        Ok(cfg)
    }
}

fn single(problem: ProblemKind, args: &RunArgs) -> Result<()> {
    let cfg = args.config(problem)?;
    let row = run(&cfg)?;
    println!("{}", serde_json::to_string(&row)?);
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(format!("results/{problem}")));
    emit_results(&[row], &out)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Accuracy(a) => single(ProblemKind::Accuracy, &a),
        Command::Cavity(a) => single(ProblemKind::Cavity, &a),
        Command::Verify => {
            let checks = run_verification()?;
            checks.iter().for_each(|c| println!("{c}"));
            match checks.iter().filter(|c| !c.passed()).count() {
                0 => Ok(()),
                n => Err(BenchError::Verification(n)),
            }
        }
        Command::Sweep { file, out } => {
            let runs = parse_sweep(&std::fs::read_to_string(&file)?)?;
            let mut rows = Vec::with_capacity(runs.len());
            for (i, cfg) in runs.iter().enumerate() {
                log::info!("run {}/{}", i + 1, runs.len());
                rows.push(run(cfg)?);
            }
            emit_results(&rows, &out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(3);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
