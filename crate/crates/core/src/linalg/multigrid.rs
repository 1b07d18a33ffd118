//! Geometric multigrid for the Q1 pressure Laplacian on a uniform grid of
//! `nx x ny` cells with one pinned node.

use super::lu::{lu_factor, LuFactors};
use crate::error::{Error, Result};
use crate::sparse::{SparseMatrix, TripletBuilder};

/// Bilinear prolongation from a `(nx/2) x (ny/2)` cell grid to `nx x ny`.
pub fn q1_prolongation(nx: usize, ny: usize) -> SparseMatrix {
    let (cx, cy) = (nx / 2, ny / 2);
    let fine = (nx + 1) * (ny + 1);
    let coarse = (cx + 1) * (cy + 1);
    let mut t = TripletBuilder::with_capacity(fine, coarse, 4 * fine);
    for j in 0..=ny {
        for i in 0..=nx {
            let row = i + j * (nx + 1);
            let xs: &[(usize, f64)] = &if i % 2 == 0 {
                vec![(i / 2, 1.0)]
            } else {
                vec![(i / 2, 0.5), (i / 2 + 1, 0.5)]
            };
            let ys: &[(usize, f64)] = &if j % 2 == 0 {
                vec![(j / 2, 1.0)]
            } else {
                vec![(j / 2, 0.5), (j / 2 + 1, 0.5)]
            };
            for &(a, wa) in xs {
                for &(b, wb) in ys {
                    t.push(row, a + b * (cx + 1), wa * wb);
                }
            }
        }
    }
    t.build()
}

#[derive(Debug, Clone)]
struct Level {
    a: SparseMatrix,
    inv_diag: Vec<f64>,
    /// Prolongation from the next coarser level into this one.
    p: SparseMatrix,
    r: SparseMatrix,
}

/// Approximate inverse of the pinned pressure Laplacian by a fixed number of
/// V(1,1) cycles with damped Jacobi smoothing and a direct coarsest solve.
///
/// The pinned row and column are replaced by the identity, so the pinned
/// entry of the result equals that of the right-hand side.
#[derive(Debug, Clone)]
pub struct PressurePoisson {
    levels: Vec<Level>,
    coarse: LuFactors,
    pin: usize,
    pub cycles: usize,
    pub omega: f64,
}

/// Replaces row and column `pin` of `k` by those of the identity.
pub fn pin_matrix(k: &SparseMatrix, pin: usize) -> SparseMatrix {
    let n = k.nrows();
    let mut t = TripletBuilder::with_capacity(n, n, k.nnz());
    for i in 0..n {
        if i == pin {
            t.push(i, i, 1.0);
            continue;
        }
        let (cols, vals) = k.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if j != pin {
                t.push(i, j, v);
            }
        }
    }
    t.build()
}

impl PressurePoisson {
    /// Builds the hierarchy for `k` assembled on `nx x ny` cells, coarsening
    /// by two while both counts stay even and above two cells.
    pub fn new(k: &SparseMatrix, nx: usize, ny: usize, pin: usize, cycles: usize) -> Result<Self> {
        if k.nrows() != (nx + 1) * (ny + 1) {
            return Err(Error::DimensionMismatch {
                expected: (nx + 1) * (ny + 1),
                found: k.nrows(),
            });
        }
        let mut levels = Vec::new();
        let mut a = pin_matrix(k, pin);
        let (mut mx, mut my) = (nx, ny);
        let mut pin_here = Some(pin);
        while mx % 2 == 0 && my % 2 == 0 && mx > 2 && my > 2 {
            let mut p = q1_prolongation(mx, my);
            if let Some(pn) = pin_here {
                // the pinned fine value receives no coarse correction
                let rows: Vec<usize> = (0..p.nrows()).filter(|&i| i != pn).collect();
                let cols: Vec<usize> = (0..p.ncols()).collect();
                let mut t = TripletBuilder::new(p.nrows(), p.ncols());
                let kept = p.submatrix(&rows, &cols);
                for (k, &i) in rows.iter().enumerate() {
                    let (c, v) = kept.row(k);
                    for (&j, &x) in c.iter().zip(v) {
                        t.push(i, j, x);
                    }
                }
                p = t.build();
            }
            let r = p.transpose();
            let coarse = r.matmul(&a).matmul(&p);
            let inv_diag = a.diagonal().iter().map(|d| 1.0 / d).collect();
            levels.push(Level { a, inv_diag, p, r });
            a = coarse;
            mx /= 2;
            my /= 2;
            pin_here = None;
        }
        let coarse = lu_factor(&a)?;
        Ok(Self {
            levels,
            coarse,
            pin,
            cycles,
            omega: 2.0 / 3.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.levels.first().map_or(self.coarse.dim(), |l| l.a.nrows())
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len() + 1
    }

    /// `x ~ K^{-1} b` after `cycles` V-cycles from zero.
    pub fn apply(&self, b: &[f64], x: &mut [f64]) {
        x.iter_mut().for_each(|v| *v = 0.0);
        if self.levels.is_empty() {
            x.copy_from_slice(&self.coarse.solve(b));
            return;
        }
        for _ in 0..self.cycles {
            self.vcycle(0, b, x);
        }
        x[self.pin] = b[self.pin];
    }

    fn vcycle(&self, k: usize, b: &[f64], x: &mut [f64]) {
        if k == self.levels.len() {
            x.copy_from_slice(&self.coarse.solve(b));
            return;
        }
        let lv = &self.levels[k];
        let n = b.len();
        let mut r = vec![0.0; n];
        self.smooth(lv, b, x, &mut r);
        lv.a.mul_vec(x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let rc = lv.r.apply(&r);
        let mut ec = vec![0.0; rc.len()];
        self.vcycle(k + 1, &rc, &mut ec);
        lv.p.mul_vec_add(1.0, &ec, x);
        self.smooth(lv, b, x, &mut r);
    }

    fn smooth(&self, lv: &Level, b: &[f64], x: &mut [f64], scratch: &mut [f64]) {
        lv.a.mul_vec(x, scratch);
        for i in 0..x.len() {
            x[i] += self.omega * lv.inv_diag[i] * (b[i] - scratch[i]);
        }
    }
}
