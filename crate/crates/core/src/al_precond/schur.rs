use nalgebra::{DMatrix, DVector};

use super::{AugmentedSystem, PressureOperators};
use crate::error::{Error, Result};
use crate::linalg::{kron_identity_apply, lu_factor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchurMode {
    /// Two V-cycles for `K_p`, Chebyshev for `M_p`.
    Approximate,
    /// Same formula with direct solves for `K_p` and `M_p`.
    ExactInner,
    /// Dense `S_gamma = Psi2 Phi_gamma^{-1} Psi1`, for small instances only.
    TrueDense,
}

/// Approximate inverse of `S_gamma`:
///
/// ```text
/// gamma Wcal^{-1} + dt^{-2} (A^{-1} ⊗ I) [I ⊗ K_p^{-1} + nu dt A ⊗ M_p^{-1}] (A^{-1} ⊗ I)
/// ```
#[derive(Debug, Clone)]
pub struct SchurApprox {
    pub gamma: f64,
    pub dt: f64,
    pub nu: f64,
    pub a: DMatrix<f64>,
    pub a_inv: DMatrix<f64>,
    pub mode: SchurMode,
    dense: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

/// Largest stacked pressure dimension for the dense Schur complement.
const TRUE_DENSE_LIMIT: usize = 2000;

impl SchurApprox {
    pub fn new(sys: &AugmentedSystem<'_>, mode: SchurMode) -> Result<Self> {
        let blocks = sys.blocks;
        let a = blocks.a.clone();
        let a_inv = a.clone().try_inverse().ok_or(Error::SingularTableau(0.0))?;
        let dense = match mode {
            SchurMode::TrueDense => Some(dense_schur(sys)?.lu()),
            _ => None,
        };
        Ok(Self {
            gamma: sys.gamma,
            dt: blocks.dt,
            nu: blocks.nu,
            a,
            a_inv,
            mode,
            dense,
        })
    }

    pub fn apply(&self, ops: &PressureOperators, r: &[f64], z: &mut [f64]) {
        if let Some(lu) = &self.dense {
            let x = lu.solve(&DVector::from_column_slice(r)).expect("dense Schur complement is singular");
            z.copy_from_slice(x.as_slice());
            return;
        }
        let exact = self.mode == SchurMode::ExactInner;
        let np = ops.n_p();
        let s = self.a.nrows();
        let mut v = vec![0.0; r.len()];
        kron_identity_apply(&self.a_inv, np, r, &mut v);
        let mut kv = vec![0.0; r.len()];
        let mut mv = vec![0.0; r.len()];
        for i in 0..s {
            let blk = i * np..(i + 1) * np;
            ops.kp_inv(exact, &v[blk.clone()], &mut kv[blk.clone()]);
            ops.mp_inv(exact, &v[blk.clone()], &mut mv[blk]);
        }
        let mut amv = vec![0.0; r.len()];
        kron_identity_apply(&self.a, np, &mv, &mut amv);
        let c = self.nu * self.dt;
        kv.iter_mut().zip(&amv).for_each(|(k, m)| *k += c * m);
        kron_identity_apply(&self.a_inv, np, &kv, z);
        let scale = 1.0 / (self.dt * self.dt);
        z.iter_mut().for_each(|x| *x *= scale);
        if self.gamma != 0.0 {
            let mut wr = vec![0.0; r.len()];
            for i in 0..s {
                let blk = i * np..(i + 1) * np;
                ops.w_inv(&r[blk.clone()], &mut wr[blk]);
            }
            kron_identity_apply(&self.a_inv, np, &wr, &mut v);
            let c = self.gamma / self.dt;
            z.iter_mut().zip(&v).for_each(|(x, w)| *x += c * w);
        }
    }
}

/// `z = S_gamma~^{-1} r`
pub fn apply_schur_inverse(schur: &SchurApprox, ops: &PressureOperators, r: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; r.len()];
    schur.apply(ops, r, &mut z);
    z
}

/// Dense `Psi2 Phi_gamma^{-1} Psi1`.
pub(crate) fn dense_schur(sys: &AugmentedSystem<'_>) -> Result<DMatrix<f64>> {
    let blocks = sys.blocks;
    let m = blocks.stages() * blocks.n_p();
    if m > TRUE_DENSE_LIMIT {
        return Err(Error::Config(format!("dense Schur complement of size {m} is too large")));
    }
    let lu = lu_factor(&sys.phi_sparse())?;
    let psi1 = blocks.psi1.to_dense();
    let mut x = DMatrix::zeros(psi1.nrows(), m);
    for j in 0..m {
        let col: Vec<f64> = psi1.column(j).iter().copied().collect();
        x.set_column(j, &DVector::from_vec(lu.solve(&col)));
    }
    Ok(blocks.psi2.to_dense() * x)
}
