//! Sweep files: a sequence of `[run]` blocks, each a list of `key = value`
//! lines. `#` starts a comment. Keys not given keep the defaults of the
//! block's problem.
//!
//! ```text
//! [run]
//! problem = cavity
//! stages = 2
//! level = 3
//! nu = 1/100
//! ```

use crate::{parse_family, parse_on_off, parse_w_mode, BenchError, DiagMode, ProblemKind, Result, RunConfig};

/// Accepts plain floats and fractions such as `1/100`.
pub fn parse_number(s: &str) -> Result<f64> {
    let bad = || BenchError::Config(format!("not a number: '{s}'"));
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            a / b
        }
        None => s.trim().parse().map_err(|_| bad())?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

fn parse_int<T: std::str::FromStr>(key: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| BenchError::Config(format!("{key}: expected an integer, got '{s}'")))
}

/// Base configuration for a problem, before any key is applied.
pub fn defaults(problem: ProblemKind) -> RunConfig {
    match problem {
        ProblemKind::Accuracy => RunConfig::accuracy(2, 3, 1.0),
        ProblemKind::Cavity => RunConfig::cavity(2, 3, 1.0 / 100.0, 1.0),
    }
}

/// Sets one key on a configuration. `problem` is not accepted here since it
/// selects the defaults.
pub fn apply_setting(cfg: &mut RunConfig, key: &str, value: &str) -> Result<()> {
    let value = value.trim();
    match key.trim().to_ascii_lowercase().replace('-', "_").as_str() {
        "tableau" | "family" => cfg.family = parse_family(value)?,
        "stages" | "s" => cfg.stages = parse_int(key, value)?,
        "level" | "l" => cfg.level = parse_int(key, value)?,
        "nu" => cfg.nu = parse_number(value)?,
        "gamma" => cfg.gamma = parse_number(value)?,
        "t_final" | "t" => cfg.t_final = parse_number(value)?,
        "nt" | "n_steps" => {
            cfg.n_steps = match value {
                "auto" => None,
                v => Some(parse_int(key, v)?),
            }
        }
        "w_mode" => cfg.w_mode = parse_w_mode(value)?,
        "diag_solve" => cfg.diag = value.parse::<DiagMode>()?,
        "inexact_iterations" => cfg.inexact_iterations = parse_int(key, value)?,
        "lps" => {
            cfg.lps = match value {
                "auto" => None,
                v => Some(parse_on_off(v)?),
            }
        }
        "newton_rel_tol" => cfg.newton.rel_tol = parse_number(value)?,
        "newton_abs_tol" => cfg.newton.abs_tol = parse_number(value)?,
        "newton_max_iters" => cfg.newton.max_iters = parse_int(key, value)?,
        "krylov_rel_tol" => cfg.krylov_rel_tol = parse_number(value)?,
        "krylov_abs_tol" => cfg.krylov_abs_tol = parse_number(value)?,
        "krylov_max_iters" => cfg.krylov_max_iters = parse_int(key, value)?,
        "seed" => cfg.seed = parse_int(key, value)?,
        "timings" => cfg.record_timings = parse_on_off(value)?,
        "snapshots" => cfg.snapshot_dir = Some(value.into()),
        other => return Err(BenchError::Config(format!("unknown key '{other}'"))),
    }
    Ok(())
}

fn finish(block: &[(usize, String, String)]) -> Result<RunConfig> {
    let problem = block
        .iter()
        .find(|(_, k, _)| k == "problem")
        .map(|(_, _, v)| v.parse::<ProblemKind>())
        .transpose()?
        .unwrap_or(ProblemKind::Accuracy);
    let mut cfg = defaults(problem);
    for (line, k, v) in block.iter().filter(|(_, k, _)| k != "problem") {
        apply_setting(&mut cfg, k, v).map_err(|e| match e {
            BenchError::Config(m) => BenchError::Config(format!("line {line}: {m}")),
            other => other,
        })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_sweep(text: &str) -> Result<Vec<RunConfig>> {
    let mut runs = Vec::new();
    let mut block: Option<Vec<(usize, String, String)>> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.eq_ignore_ascii_case("[run]") {
            if let Some(b) = block.take() {
                runs.push(finish(&b)?);
            }
            block = Some(Vec::new());
            continue;
        }
        let Some(b) = block.as_mut() else {
            return Err(BenchError::Config(format!("line {}: setting outside a [run] block", i + 1)));
        };
        let Some((k, v)) = line.split_once('=') else {
            return Err(BenchError::Config(format!("line {}: expected key = value", i + 1)));
        };
        b.push((i + 1, k.trim().to_ascii_lowercase(), v.trim().to_string()));
    }
    if let Some(b) = block {
        runs.push(finish(&b)?);
    }
    if runs.is_empty() {
        return Err(BenchError::Config("sweep file has no [run] blocks".into()));
    }
    Ok(runs)
}
