use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Incomplete LU factorization with zero fill, stored on the pattern of the
/// input matrix (unit lower factor implicit).
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: SparseMatrix,
    diag: Vec<usize>,
    /// Diagonal shift that was needed to complete the factorization.
    pub shift: f64,
}

/// Computes ILU(0) of `a`. A zero pivot triggers one retry on
/// `a + 1e-8 ||a||_inf I`; a second failure is reported.
pub fn ilu0(a: &SparseMatrix) -> Result<Ilu0> {
    match factor(a, 0.0) {
        Ok(f) => Ok(f),
        Err(Error::DiagonalBreakdown(_)) => {
            let shift = 1e-8 * a.norm_inf();
            log::debug!("ILU(0) breakdown, retrying with diagonal shift {shift:e}");
            factor(a, shift)
        }
        Err(e) => Err(e),
    }
}

fn factor(a: &SparseMatrix, shift: f64) -> Result<Ilu0> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    let mut lu = a.clone();
    let row_ptr = lu.row_ptr().to_vec();
    let col_idx = lu.col_idx().to_vec();
    let mut diag = vec![usize::MAX; n];
    for i in 0..n {
        for k in row_ptr[i]..row_ptr[i + 1] {
            if col_idx[k] == i {
                diag[i] = k;
            }
        }
        if diag[i] == usize::MAX {
            return Err(Error::DiagonalBreakdown(i));
        }
    }
    let tiny = f64::MIN_POSITIVE.sqrt();
    let vals = lu.values_mut();
    for i in 0..n {
        vals[diag[i]] += shift;
    }
    let mut pos = vec![usize::MAX; n];
    for i in 0..n {
        for k in row_ptr[i]..row_ptr[i + 1] {
            pos[col_idx[k]] = k;
        }
        for kk in row_ptr[i]..row_ptr[i + 1] {
            let k = col_idx[kk];
            if k >= i {
                break;
            }
            let pivot = vals[diag[k]];
            let lik = vals[kk] / pivot;
            vals[kk] = lik;
            for m in diag[k] + 1..row_ptr[k + 1] {
                let p = pos[col_idx[m]];
                if p != usize::MAX {
                    vals[p] -= lik * vals[m];
                }
            }
        }
        if vals[diag[i]].abs() <= tiny {
            return Err(Error::DiagonalBreakdown(i));
        }
        for k in row_ptr[i]..row_ptr[i + 1] {
            pos[col_idx[k]] = usize::MAX;
        }
    }
    Ok(Ilu0 { lu, diag, shift })
}

impl Ilu0 {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `z = (L U)^{-1} r`.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let (rp, ci, v) = (self.lu.row_ptr(), self.lu.col_idx(), self.lu.values());
        let n = self.dim();
        z.copy_from_slice(r);
        for i in 0..n {
            let mut s = z[i];
            for k in rp[i]..self.diag[i] {
                s -= v[k] * z[ci[k]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in self.diag[i] + 1..rp[i + 1] {
                s -= v[k] * z[ci[k]];
            }
            z[i] = s / v[self.diag[i]];
        }
    }
}
