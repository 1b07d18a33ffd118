//! Flexible GMRES with right preconditioning.
//!
//! The preconditioned directions `z_k = P_k(v_k)` are stored alongside the
//! Arnoldi basis, so `P` may change from one iteration to the next.

use crate::error::{Error, Result};
use crate::sparse::{dot, norm2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iters: usize,
    /// Restart length; `None` keeps the whole basis.
    pub restart: Option<usize>,
    /// Log every iteration's residual at debug level.
    pub verbose: bool,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 1e-10,
            max_iters: 500,
            restart: None,
            verbose: false,
        }
    }
}

impl KrylovConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) || self.max_iters == 0 || self.restart == Some(0) {
            return Err(Error::Config(format!("invalid Krylov settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIters,
    /// The Arnoldi process produced a (numerically) zero vector before the
    /// tolerance was met.
    Breakdown,
}

#[derive(Debug, Clone)]
pub struct KrylovResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Residual norm estimates, starting with the initial residual.
    pub residuals: Vec<f64>,
    pub reason: StopReason,
}

impl KrylovResult {
    pub fn converged(&self) -> bool {
        self.reason == StopReason::Converged
    }

    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().unwrap_or(&0.0)
    }
}

/// Threshold below which reorthogonalization is triggered: the norm after
/// Gram-Schmidt dropped by more than this factor.
const REORTH: f64 = 0.7;

/// Solves `A x = b`. `apply_a(v, out)` computes `out = A v`, `apply_p(v, out)`
/// an approximation of `A^{-1} v`.
pub fn fgmres<A, P>(mut apply_a: A, mut apply_p: P, b: &[f64], x0: Option<&[f64]>, cfg: &KrylovConfig) -> Result<KrylovResult>
where
    A: FnMut(&[f64], &mut [f64]) -> Result<()>,
    P: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    cfg.validate()?;
    let n = b.len();
    let mut x = match x0 {
        Some(v) if v.len() != n => {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: v.len(),
            })
        }
        Some(v) => v.to_vec(),
        None => vec![0.0; n],
    };
    let mut r = vec![0.0; n];
    let residual = |x: &[f64], r: &mut Vec<f64>, apply_a: &mut A| -> Result<f64> {
        apply_a(x, r)?;
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        Ok(norm2(r))
    };
    let mut beta = residual(&x, &mut r, &mut apply_a)?;
    let target = (cfg.rel_tol * beta).max(cfg.abs_tol);
    let mut residuals = vec![beta];
    let mut iterations = 0;
    if beta <= target {
        return Ok(KrylovResult {
            x,
            iterations,
            residuals,
            reason: StopReason::Converged,
        });
    }
    let m = cfg.restart.unwrap_or(cfg.max_iters).min(cfg.max_iters);
    loop {
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
        // column-major Hessenberg after Givens rotations
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut cs: Vec<(f64, f64)> = Vec::with_capacity(m);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        v.push(r.iter().map(|ri| ri / beta).collect());
        let mut k = 0;
        let mut breakdown = false;
        let mut done = false;
        while k < m && iterations < cfg.max_iters {
            let mut zk = vec![0.0; n];
            apply_p(&v[k], &mut zk)?;
            let mut w = vec![0.0; n];
            apply_a(&zk, &mut w)?;
            z.push(zk);
            let mut hk = vec![0.0; k + 2];
            let before = norm2(&w);
            for (i, vi) in v.iter().enumerate() {
                let hij = dot(&w, vi);
                hk[i] = hij;
                w.iter_mut().zip(vi).for_each(|(a, b)| *a -= hij * b);
            }
            let mut wn = norm2(&w);
            if wn < REORTH * before {
                for (i, vi) in v.iter().enumerate() {
                    let c = dot(&w, vi);
                    hk[i] += c;
                    w.iter_mut().zip(vi).for_each(|(a, b)| *a -= c * b);
                }
                wn = norm2(&w);
            }
            hk[k + 1] = wn;
            for (i, &(c, s)) in cs.iter().enumerate() {
                let (a, bb) = (hk[i], hk[i + 1]);
                hk[i] = c * a + s * bb;
                hk[i + 1] = -s * a + c * bb;
            }
            let denom = hk[k].hypot(hk[k + 1]);
            let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (hk[k] / denom, hk[k + 1] / denom) };
            hk[k] = denom;
            hk[k + 1] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;
            cs.push((c, s));
            h.push(hk);
            k += 1;
            iterations += 1;
            let res = g[k].abs();
            residuals.push(res);
            if cfg.verbose {
                log::debug!("fgmres it {iterations}: residual {res:e}");
            }
            if res <= target {
                done = true;
                break;
            }
            if wn <= 1e-14 * before.max(f64::MIN_POSITIVE) {
                breakdown = true;
                break;
            }
            v.push(w.iter().map(|a| a / wn).collect());
        }
        // back substitution for the least-squares coefficients
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[j][i] * y[j];
            }
            y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
        }
        for (j, zj) in z.iter().enumerate() {
            x.iter_mut().zip(zj).for_each(|(a, b)| *a += y[j] * b);
        }
        if done || breakdown || iterations >= cfg.max_iters {
            let reason = if done {
                StopReason::Converged
            } else if breakdown {
                StopReason::Breakdown
            } else {
                StopReason::MaxIters
            };
            return Ok(KrylovResult {
                x,
                iterations,
                residuals,
                reason,
            });
        }
        beta = residual(&x, &mut r, &mut apply_a)?;
        if beta <= target {
            *residuals.last_mut().unwrap() = beta;
            return Ok(KrylovResult {
                x,
                iterations,
                residuals,
                reason: StopReason::Converged,
            });
        }
    }
}
