use super::lu::lu_factor;
use crate::error::Result;
use crate::sparse::{dot, norm2, SparseMatrix};

/// Jacobi-preconditioned Chebyshev semi-iteration with a fixed step count,
/// used as an approximate inverse of a mass matrix.
#[derive(Debug, Clone)]
pub struct ChebyshevMass {
    matrix: SparseMatrix,
    inv_diag: Vec<f64>,
    /// Spectral brackets of `D^{-1} M`.
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub steps: usize,
}

/// Number of power / inverse-power iterations used for the brackets.
const BRACKET_ITERS: usize = 50;

impl ChebyshevMass {
    /// Estimates the brackets: the upper one is the smaller of the Gershgorin
    /// bound and a padded power-iteration estimate, the lower one a shrunken
    /// inverse-power estimate.
    pub fn new(m: &SparseMatrix, steps: usize) -> Result<Self> {
        let n = m.nrows();
        let d = m.diagonal();
        let inv_diag: Vec<f64> = d.iter().map(|v| 1.0 / v).collect();
        let mut gersh: f64 = 0.0;
        for i in 0..n {
            let s: f64 = m.row(i).1.iter().map(|v| v.abs()).sum();
            gersh = gersh.max(s * inv_diag[i]);
        }
        // D^{-1/2} M D^{-1/2} is symmetric with the same spectrum as D^{-1} M
        let sq: Vec<f64> = inv_diag.iter().map(|v| v.sqrt()).collect();
        let scaled_apply = |x: &[f64]| -> Vec<f64> {
            let y: Vec<f64> = x.iter().zip(&sq).map(|(a, b)| a * b).collect();
            m.apply(&y).iter().zip(&sq).map(|(a, b)| a * b).collect()
        };
        let start: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
        let mut x = start.clone();
        let mut lmax = 0.0;
        for _ in 0..BRACKET_ITERS {
            let nx = norm2(&x);
            x.iter_mut().for_each(|v| *v /= nx);
            let y = scaled_apply(&x);
            lmax = dot(&x, &y);
            x = y;
        }
        let lu = lu_factor(m)?;
        let mut x = start;
        let mut lmin = 0.0;
        for _ in 0..BRACKET_ITERS {
            let nx = norm2(&x);
            x.iter_mut().for_each(|v| *v /= nx);
            let y: Vec<f64> = x.iter().zip(&sq).map(|(a, b)| a / b).collect();
            let z = lu.solve(&y);
            let y: Vec<f64> = z.iter().zip(&sq).map(|(a, b)| a / b).collect();
            lmin = 1.0 / dot(&x, &y);
            x = y;
        }
        Ok(Self {
            matrix: m.clone(),
            inv_diag,
            lambda_min: 0.99 * lmin,
            lambda_max: gersh.min(1.01 * lmax),
            steps,
        })
    }

    pub fn dim(&self) -> usize {
        self.inv_diag.len()
    }

    /// `x ~ M^{-1} b` by Chebyshev iteration from zero; each of the `steps`
    /// iterations costs one product with `M`, on top of the initial scaled
    /// Jacobi step.
    pub fn apply(&self, b: &[f64], x: &mut [f64]) {
        let theta = 0.5 * (self.lambda_max + self.lambda_min);
        let delta = 0.5 * (self.lambda_max - self.lambda_min);
        let sigma = theta / delta;
        let mut rho = 1.0 / sigma;
        let n = self.dim();
        let mut r = b.to_vec();
        let mut d: Vec<f64> = r.iter().zip(&self.inv_diag).map(|(a, w)| a * w / theta).collect();
        let mut ad = vec![0.0; n];
        x.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..=self.steps {
            for i in 0..n {
                x[i] += d[i];
            }
            if k == self.steps {
                break;
            }
            self.matrix.mul_vec(&d, &mut ad);
            for i in 0..n {
                r[i] -= ad[i];
            }
            let rho_next = 1.0 / (2.0 * sigma - rho);
            let (c1, c2) = (rho_next * rho, 2.0 * rho_next / delta);
            for i in 0..n {
                d[i] = c1 * d[i] + c2 * self.inv_diag[i] * r[i];
            }
            rho = rho_next;
        }
    }
}
