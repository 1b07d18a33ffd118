//! Dense checks of the algebra behind the augmentation, for small meshes.

use std::io::Write;

use nalgebra::{Complex, DMatrix};

use super::{AugmentedSystem, Preconditioner, PressureOperators};
use crate::error::{Error, Result};
use crate::stage_system::StageBlocks;

/// Inner matrices with a reciprocal condition number below this are
/// reported as singular.
const RCOND_MIN: f64 = 1e-13;
const SCHUR_MAX_ITERS: usize = 100_000;

fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

fn checked_inverse(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sv = m.singular_values();
    let (lo, hi) = (sv.min(), sv.max());
    let rcond = if hi > 0.0 { lo / hi } else { 0.0 };
    if rcond < RCOND_MIN {
        return Err(Error::SingularInner(rcond));
    }
    m.try_inverse().ok_or(Error::SingularInner(rcond))
}

/// `Phi`, `Psi1`, `Psi2` of a stage system as dense matrices.
fn dense_blocks(blocks: &StageBlocks) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let full = blocks.to_sparse().to_dense();
    let su = blocks.stages() * blocks.n_u();
    let sp = blocks.stages() * blocks.n_p();
    (
        full.view((0, 0), (su, su)).into_owned(),
        full.view((0, su), (su, sp)).into_owned(),
        full.view((su, 0), (sp, su)).into_owned(),
    )
}

/// `Wcal^{-1} = dt^{-1} A^{-1} ⊗ W^{-1}`
fn wcal_inverse(blocks: &StageBlocks, ops: &PressureOperators) -> Result<DMatrix<f64>> {
    let a_inv = blocks.a.clone().try_inverse().ok_or(Error::SingularTableau(0.0))?;
    let w_inv = ops.w_dense().try_inverse().ok_or(Error::SingularInner(0.0))?;
    Ok(a_inv.kronecker(&w_inv) / blocks.dt)
}

/// `|| S_gamma^{-1} - (gamma Wcal^{-1} + (Psi2 Phi^{-1} Psi1)^{-1}) || / || S_gamma^{-1} ||`
/// in the Frobenius norm, where `S_gamma = Psi2 (Phi + gamma Psi1 Wcal^{-1} Psi2)^{-1} Psi1`.
pub fn smw_error_dense(
    phi: &DMatrix<f64>,
    psi1: &DMatrix<f64>,
    psi2: &DMatrix<f64>,
    wcal_inv: &DMatrix<f64>,
    gamma: f64,
) -> Result<f64> {
    let phi_inv = phi.clone().try_inverse().ok_or(Error::SingularInner(0.0))?;
    let inner = psi2 * &phi_inv * psi1;
    let inner_inv = checked_inverse(inner)?;
    let phi_g = phi + psi1 * wcal_inv * psi2 * gamma;
    let phi_g_inv = phi_g.try_inverse().ok_or(Error::SingularInner(0.0))?;
    let lhs = checked_inverse(psi2 * phi_g_inv * psi1)?;
    let rhs = wcal_inv * gamma + inner_inv;
    Ok(rel_diff(&lhs, &rhs))
}

/// Dense check of the Sherman-Morrison-Woodbury form of `S_gamma^{-1}` on a
/// stage system with the pinned pressure removed.
pub fn verify_smw_identity(blocks: &StageBlocks, ops: &PressureOperators, gamma: f64) -> Result<f64> {
    let (phi, psi1, psi2) = dense_blocks(blocks);
    smw_error_dense(&phi, &psi1, &psi2, &wcal_inverse(blocks, ops)?, gamma)
}

/// Relative difference between `gamma Psi1 Wcal^{-1} Psi2` and
/// `gamma dt (A ⊗ B^T W^{-1} B)`.
pub fn kronecker_collapse_error(blocks: &StageBlocks, ops: &PressureOperators, gamma: f64) -> Result<f64> {
    let (_, psi1, psi2) = dense_blocks(blocks);
    let lhs = psi1 * wcal_inverse(blocks, ops)? * psi2 * gamma;
    let rhs = blocks.a.kronecker(&ops.g.to_dense()) * (gamma * blocks.dt);
    Ok(rel_diff(&lhs, &rhs))
}

/// Relative difference between `Psi2 Phi^{-1} Psi1` and
/// `dt^2 (A ⊗ I)(I ⊗ B) Phi^{-1} (I ⊗ B^T)(A ⊗ I)`.
pub fn factorization_identity_error(blocks: &StageBlocks) -> Result<f64> {
    let (phi, psi1, psi2) = dense_blocks(blocks);
    let phi_inv = phi.try_inverse().ok_or(Error::SingularInner(0.0))?;
    let lhs = &psi2 * &phi_inv * &psi1;
    let s = blocks.stages();
    let eye_s = DMatrix::<f64>::identity(s, s);
    let b = blocks.div().to_dense();
    let ai = blocks.a.kronecker(&DMatrix::<f64>::identity(b.nrows(), b.nrows()));
    let ib = eye_s.kronecker(&b);
    let ibt = eye_s.kronecker(&b.transpose());
    let rhs = &ai * ib * phi_inv * ibt * &ai * (blocks.dt * blocks.dt);
    Ok(rel_diff(&lhs, &rhs))
}

/// Eigenvalues of the right-preconditioned operator `A P^{-1}`, formed
/// column by column.
pub fn preconditioned_eigenvalues(
    sys: &AugmentedSystem<'_>,
    ops: &PressureOperators,
    precond: &Preconditioner,
) -> Result<Vec<Complex<f64>>> {
    let n = sys.dim();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        precond.apply(sys, ops, &e, &mut z)?;
        sys.apply(&z, &mut col)?;
        m.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    let schur = nalgebra::linalg::Schur::try_new(m, 1e-13, SCHUR_MAX_ITERS)
        .ok_or_else(|| Error::Config("eigenvalue iteration did not converge".into()))?;
    let mut eig: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(eig)
}

/// Writes `re,im` rows with a header.
pub fn write_eigenvalues_csv<W: Write>(mut w: W, eig: &[Complex<f64>]) -> Result<()> {
    writeln!(w, "re,im")?;
    for z in eig {
        writeln!(w, "{:.12e},{:.12e}", z.re, z.im)?;
    }
    Ok(())
}
