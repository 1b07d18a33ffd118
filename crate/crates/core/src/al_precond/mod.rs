//! Augmented Lagrangian reformulation of the stage system and its block
//! triangular preconditioner.
//!
//! The velocity block is augmented by `gamma Psi1 Wcal^{-1} Psi2` with
//! `Wcal = dt A ⊗ W`, which collapses to `gamma dt (A ⊗ B^T W^{-1} B)`; the
//! solution is unchanged because the same multiple of the constraint rows is
//! added to the momentum right-hand side.

mod oracles;
mod schur;

pub use oracles::{
    factorization_identity_error, kronecker_collapse_error, preconditioned_eigenvalues, smw_error_dense,
    verify_smw_identity, write_eigenvalues_csv,
};
pub use schur::{apply_schur_inverse, SchurApprox, SchurMode};

use std::time::Instant;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fgmres::{fgmres, KrylovConfig, KrylovResult};
use crate::linalg::{ilu0, lu_factor, ChebyshevMass, Ilu0, LuFactors, PressurePoisson};
use crate::sparse::{norm2, SparseMatrix, TripletBuilder};
use crate::stage_system::{apply_block_rows, push_block, Discretization, StageBlocks};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WMode {
    /// `W = diag(M_p)`
    DiagMp,
    /// `W = M_p`; only on small meshes because `B^T M_p^{-1} B` is dense.
    FullMp,
}

/// Largest reduced pressure dimension for which `W = M_p` is accepted.
pub const FULL_MP_LIMIT: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentationParams {
    pub gamma: f64,
    pub w_mode: WMode,
}

impl Default for AugmentationParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            w_mode: WMode::DiagMp,
        }
    }
}

/// Pressure-space operators that depend only on the mesh.
#[derive(Debug, Clone)]
pub struct PressureOperators {
    pub div: SparseMatrix,
    pub mass_p: SparseMatrix,
    pub w_mode: WMode,
    w_diag: Vec<f64>,
    w_lu: Option<LuFactors>,
    /// `B^T W^{-1} B`
    pub g: SparseMatrix,
    mg: PressurePoisson,
    cheb: ChebyshevMass,
    kp_lu: LuFactors,
    mp_lu: LuFactors,
    pin: usize,
    n_p_full: usize,
}

/// V-cycles per pressure Laplacian application.
pub const MG_CYCLES: usize = 2;
/// Chebyshev iterations per pressure mass application.
pub const CHEBYSHEV_STEPS: usize = 20;

impl PressureOperators {
    pub fn new(disc: &Discretization, w_mode: WMode) -> Result<Self> {
        let kept = &disc.kept_p;
        let div = disc.div_r.clone();
        let mass_p = disc.mass_p.submatrix(kept, kept);
        let kp = disc.stiff_p.submatrix(kept, kept);
        let nq = kept.len();
        let w_diag = mass_p.diagonal();
        let (g, w_lu) = match w_mode {
            WMode::DiagMp => {
                let mut winv_b = div.clone();
                winv_b.scale_rows(&w_diag.iter().map(|d| 1.0 / d).collect::<Vec<_>>());
                (div.transpose().matmul(&winv_b), None)
            }
            WMode::FullMp => {
                if nq > FULL_MP_LIMIT {
                    return Err(Error::FullMpTooLarge(nq, FULL_MP_LIMIT));
                }
                let lu = lu_factor(&mass_p)?;
                let bd = div.to_dense();
                let mut winv_b = DMatrix::zeros(nq, div.ncols());
                for j in 0..div.ncols() {
                    let col: Vec<f64> = bd.column(j).iter().copied().collect();
                    winv_b.set_column(j, &nalgebra::DVector::from_vec(lu.solve(&col)));
                }
                let g = bd.transpose() * winv_b;
                (SparseMatrix::from_dense(&g, 0.0), Some(lu))
            }
        };
        let sp = &disc.spaces;
        let mg = PressurePoisson::new(&disc.stiff_p, sp.mesh.nx, sp.mesh.ny, disc.pin, MG_CYCLES)?;
        let cheb = ChebyshevMass::new(&mass_p, CHEBYSHEV_STEPS)?;
        Ok(Self {
            kp_lu: lu_factor(&kp)?,
            mp_lu: lu_factor(&mass_p)?,
            div,
            mass_p,
            w_mode,
            w_diag,
            w_lu,
            g,
            mg,
            cheb,
            pin: disc.pin,
            n_p_full: sp.n_p,
        })
    }

    pub fn n_p(&self) -> usize {
        self.div.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.div.ncols()
    }

    /// `z = W^{-1} r`
    pub fn w_inv(&self, r: &[f64], z: &mut [f64]) {
        match &self.w_lu {
            None => z.iter_mut().zip(r.iter().zip(&self.w_diag)).for_each(|(zi, (ri, d))| *zi = ri / d),
            Some(lu) => z.copy_from_slice(&lu.solve(r)),
        }
    }

    /// `W` as a dense matrix.
    pub fn w_dense(&self) -> DMatrix<f64> {
        match self.w_mode {
            WMode::DiagMp => DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.w_diag.clone())),
            WMode::FullMp => self.mass_p.to_dense(),
        }
    }

    /// Approximate (two V-cycles) or exact inverse of the pinned pressure
    /// Laplacian on the reduced pressure space.
    pub fn kp_inv(&self, exact: bool, r: &[f64], z: &mut [f64]) {
        if exact {
            z.copy_from_slice(&self.kp_lu.solve(r));
            return;
        }
        let mut full = vec![0.0; self.n_p_full];
        let mut out = vec![0.0; self.n_p_full];
        let mut k = 0;
        for (i, v) in full.iter_mut().enumerate() {
            if i != self.pin {
                *v = r[k];
                k += 1;
            }
        }
        self.mg.apply(&full, &mut out);
        let mut k = 0;
        for (i, v) in out.iter().enumerate() {
            if i != self.pin {
                z[k] = *v;
                k += 1;
            }
        }
    }

    /// Approximate (Chebyshev) or exact inverse of the pressure mass matrix.
    pub fn mp_inv(&self, exact: bool, r: &[f64], z: &mut [f64]) {
        if exact {
            z.copy_from_slice(&self.mp_lu.solve(r));
        } else {
            self.cheb.apply(r, z);
        }
    }
}

/// The augmented stage system `[Phi_gamma Psi1; Psi2 0]` with right-hand
/// side `[b^u + gamma (I ⊗ B^T W^{-1}) b^p; b^p]`.
#[derive(Debug, Clone)]
pub struct AugmentedSystem<'a> {
    pub blocks: &'a StageBlocks,
    pub gamma: f64,
    /// `L_i + gamma B^T W^{-1} B`
    pub lg: Vec<SparseMatrix>,
    pub rhs_u: Vec<f64>,
    pub rhs_p: Vec<f64>,
}

pub fn build_augmented<'a>(blocks: &'a StageBlocks, ops: &PressureOperators, params: &AugmentationParams) -> Result<AugmentedSystem<'a>> {
    if params.w_mode != ops.w_mode {
        return Err(Error::Config("W mode differs from the prepared pressure operators".into()));
    }
    if !(params.gamma >= 0.0) {
        return Err(Error::Config(format!("gamma must be non-negative, got {}", params.gamma)));
    }
    let (s, nu, np) = (blocks.stages(), blocks.n_u(), blocks.n_p());
    if np != ops.n_p() || nu != ops.n_u() {
        return Err(Error::DimensionMismatch {
            expected: ops.n_u(),
            found: nu,
        });
    }
    let gamma = params.gamma;
    let lg = if gamma == 0.0 {
        blocks.l_blocks.clone()
    } else {
        blocks.l_blocks.iter().map(|l| l.add(1.0, &ops.g, gamma)).collect()
    };
    let mut rhs_u = blocks.rhs_u.clone();
    if gamma != 0.0 {
        let bt = ops.div.transpose();
        let mut z = vec![0.0; np];
        for i in 0..s {
            ops.w_inv(&blocks.rhs_p[i * np..(i + 1) * np], &mut z);
            bt.mul_vec_add(gamma, &z, &mut rhs_u[i * nu..(i + 1) * nu]);
        }
    }
    Ok(AugmentedSystem {
        blocks,
        gamma,
        lg,
        rhs_u,
        rhs_p: blocks.rhs_p.clone(),
    })
}

impl AugmentedSystem<'_> {
    pub fn stages(&self) -> usize {
        self.blocks.stages()
    }

    pub fn n_u(&self) -> usize {
        self.blocks.n_u()
    }

    pub fn n_p(&self) -> usize {
        self.blocks.n_p()
    }

    pub fn dim(&self) -> usize {
        self.blocks.dim()
    }

    pub fn rhs(&self) -> Vec<f64> {
        let mut r = self.rhs_u.clone();
        r.extend_from_slice(&self.rhs_p);
        r
    }

    /// `(Phi_gamma)_ij = delta_ij M + dt a_ij (L_i + gamma G)`
    pub fn phi_block(&self, i: usize, j: usize) -> SparseMatrix {
        let c = self.blocks.dt * self.blocks.a[(i, j)];
        if i == j {
            self.blocks.mass.add(1.0, &self.lg[i], c)
        } else {
            self.lg[i].scaled(c)
        }
    }

    /// Adds `(Phi_gamma)_ij x_j` into `y_i`.
    fn phi_block_apply_add(&self, i: usize, j: usize, x: &[f64], y: &mut [f64]) {
        let c = self.blocks.dt * self.blocks.a[(i, j)];
        if c != 0.0 {
            self.lg[i].mul_vec_add(c, x, y);
        }
        if i == j {
            self.blocks.mass.mul_vec_add(1.0, x, y);
        }
    }

    pub fn apply_phi(&self, x: &[f64], y: &mut [f64]) {
        apply_block_rows(&self.blocks.mass, &self.lg, &self.blocks.a, self.blocks.dt, x, y);
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let su = self.stages() * self.n_u();
        let (xu, xp) = x.split_at(su);
        let (yu, yp) = y.split_at_mut(su);
        self.apply_phi(xu, yu);
        let t = self.blocks.psi1.apply(xp)?;
        yu.iter_mut().zip(&t).for_each(|(a, b)| *a += b);
        yp.copy_from_slice(&self.blocks.psi2.apply(xu)?);
        Ok(())
    }

    /// Whole augmented velocity block as one sparse matrix.
    pub fn phi_sparse(&self) -> SparseMatrix {
        let (s, n) = (self.stages(), self.n_u());
        let mut t = TripletBuilder::new(s * n, s * n);
        for i in 0..s {
            for j in 0..s {
                push_block(&mut t, &self.phi_block(i, j), i * n, j * n, 1.0);
            }
        }
        t.build()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let (s, nu) = (self.stages(), self.n_u());
        let n = self.dim();
        let mut d = DMatrix::zeros(n, n);
        d.view_mut((0, 0), (s * nu, s * nu)).copy_from(&self.phi_sparse().to_dense());
        d.view_mut((0, s * nu), (s * nu, n - s * nu)).copy_from(&self.blocks.psi1.to_dense());
        d.view_mut((s * nu, 0), (n - s * nu, s * nu)).copy_from(&self.blocks.psi2.to_dense());
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagSolve {
    ExactLu,
    /// ILU(0)-preconditioned GMRES with a fixed number of iterations.
    InexactIluGmres { iterations: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GsConfig {
    pub sweeps: usize,
    pub diag: DiagSolve,
}

impl Default for GsConfig {
    fn default() -> Self {
        Self {
            sweeps: 1,
            diag: DiagSolve::ExactLu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VelocitySolve {
    GaussSeidel(GsConfig),
    /// Direct factorization of the whole augmented velocity block.
    FullExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriangularForm {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecondConfig {
    pub params: AugmentationParams,
    pub velocity: VelocitySolve,
    pub schur: SchurMode,
    pub form: TriangularForm,
}

impl Default for PrecondConfig {
    fn default() -> Self {
        Self {
            params: AugmentationParams::default(),
            velocity: VelocitySolve::GaussSeidel(GsConfig::default()),
            schur: SchurMode::Approximate,
            form: TriangularForm::Upper,
        }
    }
}

#[derive(Debug, Clone)]
enum DiagBlock {
    Lu(LuFactors),
    Ilu { ilu: Ilu0, matrix: SparseMatrix, iterations: usize },
}

impl DiagBlock {
    fn solve(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        match self {
            DiagBlock::Lu(lu) => {
                z.copy_from_slice(r);
                lu.solve_in_place(z);
            }
            DiagBlock::Ilu { ilu, matrix, iterations } => {
                let cfg = KrylovConfig {
                    rel_tol: 1e-14,
                    abs_tol: 1e-300,
                    max_iters: *iterations,
                    restart: None,
                    verbose: false,
                };
                let res = fgmres(
                    |v, out| {
                        matrix.mul_vec(v, out);
                        Ok(())
                    },
                    |v, out| {
                        ilu.apply(v, out);
                        Ok(())
                    },
                    r,
                    None,
                    &cfg,
                )?;
                z.copy_from_slice(&res.x);
            }
        }
        Ok(())
    }
}

/// Forward block Gauss-Seidel on the augmented velocity block.
#[derive(Debug, Clone)]
pub struct GaussSeidel {
    diag: Vec<DiagBlock>,
    sweeps: usize,
}

impl GaussSeidel {
    pub fn new(sys: &AugmentedSystem<'_>, cfg: &GsConfig) -> Result<Self> {
        if cfg.sweeps == 0 {
            return Err(Error::Config("Gauss-Seidel needs at least one sweep".into()));
        }
        let diag = (0..sys.stages())
            .map(|i| {
                let m = sys.phi_block(i, i);
                Ok(match cfg.diag {
                    DiagSolve::ExactLu => DiagBlock::Lu(lu_factor(&m)?),
                    DiagSolve::InexactIluGmres { iterations } => DiagBlock::Ilu {
                        ilu: ilu0(&m)?,
                        matrix: m,
                        iterations,
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { diag, sweeps: cfg.sweeps })
    }

    /// `z ~ Phi_gamma^{-1} r` by `sweeps` forward sweeps from zero.
    pub fn apply(&self, sys: &AugmentedSystem<'_>, r: &[f64], z: &mut [f64]) -> Result<()> {
        let (s, n) = (sys.stages(), sys.n_u());
        z.iter_mut().for_each(|v| *v = 0.0);
        let mut rhs = vec![0.0; n];
        let mut zi = vec![0.0; n];
        for sweep in 0..self.sweeps {
            for i in 0..s {
                rhs.copy_from_slice(&r[i * n..(i + 1) * n]);
                let mut acc = vec![0.0; n];
                for j in 0..s {
                    if j == i || (sweep == 0 && j > i) {
                        continue;
                    }
                    sys.phi_block_apply_add(i, j, &z[j * n..(j + 1) * n], &mut acc);
                }
                rhs.iter_mut().zip(&acc).for_each(|(a, b)| *a -= b);
                self.diag[i].solve(&rhs, &mut zi)?;
                z[i * n..(i + 1) * n].copy_from_slice(&zi);
            }
        }
        Ok(())
    }
}

/// One application of the Gauss-Seidel approximation of `Phi_gamma^{-1}`.
pub fn apply_gauss_seidel_11(sys: &AugmentedSystem<'_>, cfg: &GsConfig, r: &[f64]) -> Result<Vec<f64>> {
    let gs = GaussSeidel::new(sys, cfg)?;
    let mut z = vec![0.0; r.len()];
    gs.apply(sys, r, &mut z)?;
    Ok(z)
}

#[derive(Debug, Clone)]
enum VelocityBlock {
    Gs(GaussSeidel),
    Full(LuFactors),
}

/// Block triangular preconditioner with the `(2,2)` block `-S_gamma`.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    velocity: VelocityBlock,
    pub schur: SchurApprox,
    form: TriangularForm,
}

impl Preconditioner {
    pub fn new(sys: &AugmentedSystem<'_>, cfg: &PrecondConfig) -> Result<Self> {
        let velocity = match cfg.velocity {
            VelocitySolve::GaussSeidel(gs) => VelocityBlock::Gs(GaussSeidel::new(sys, &gs)?),
            VelocitySolve::FullExact => VelocityBlock::Full(lu_factor(&sys.phi_sparse())?),
        };
        Ok(Self {
            velocity,
            schur: SchurApprox::new(sys, cfg.schur)?,
            form: cfg.form,
        })
    }

    fn velocity_solve(&self, sys: &AugmentedSystem<'_>, r: &[f64], z: &mut [f64]) -> Result<()> {
        match &self.velocity {
            VelocityBlock::Gs(gs) => gs.apply(sys, r, z),
            VelocityBlock::Full(lu) => {
                z.copy_from_slice(r);
                lu.solve_in_place(z);
                Ok(())
            }
        }
    }

    /// Upper form: `z_p = -S^{-1} r_p`, `z_u = Phi^{-1}(r_u - Psi1 z_p)`.
    /// Lower form: `z_u = Phi^{-1} r_u`, `z_p = S^{-1}(Psi2 z_u - r_p)`.
    pub fn apply(&self, sys: &AugmentedSystem<'_>, ops: &PressureOperators, r: &[f64], z: &mut [f64]) -> Result<()> {
        let su = sys.stages() * sys.n_u();
        let (ru, rp) = r.split_at(su);
        let (zu, zp) = z.split_at_mut(su);
        match self.form {
            TriangularForm::Upper => {
                self.schur.apply(ops, rp, zp);
                zp.iter_mut().for_each(|v| *v = -*v);
                let t = sys.blocks.psi1.apply(zp)?;
                let rhs: Vec<f64> = ru.iter().zip(&t).map(|(a, b)| a - b).collect();
                self.velocity_solve(sys, &rhs, zu)
            }
            TriangularForm::Lower => {
                self.velocity_solve(sys, ru, zu)?;
                let t = sys.blocks.psi2.apply(zu)?;
                let rhs: Vec<f64> = t.iter().zip(rp).map(|(a, b)| a - b).collect();
                self.schur.apply(ops, &rhs, zp);
                Ok(())
            }
        }
    }
}

pub fn apply_preconditioner(
    sys: &AugmentedSystem<'_>,
    ops: &PressureOperators,
    precond: &Preconditioner,
    r: &[f64],
) -> Result<Vec<f64>> {
    let mut z = vec![0.0; r.len()];
    precond.apply(sys, ops, r, &mut z)?;
    Ok(z)
}

/// Outcome of one preconditioned linear solve.
#[derive(Debug, Clone)]
pub struct LinearSolveReport {
    pub x: Vec<f64>,
    pub krylov: KrylovResult,
    /// `||b - A x|| / ||b||` for the original (unaugmented) system.
    pub original_residual: f64,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
}

/// Outer solver: FGMRES on the augmented system with the block triangular
/// preconditioner.
#[derive(Debug, Clone)]
pub struct AugmentedSolver {
    pub ops: PressureOperators,
    pub cfg: PrecondConfig,
    pub krylov: KrylovConfig,
}

impl AugmentedSolver {
    pub fn new(disc: &Discretization, cfg: PrecondConfig, krylov: KrylovConfig) -> Result<Self> {
        Ok(Self {
            ops: PressureOperators::new(disc, cfg.params.w_mode)?,
            cfg,
            krylov,
        })
    }

    pub fn solve(&self, blocks: &StageBlocks) -> Result<LinearSolveReport> {
        let start = Instant::now();
        let sys = build_augmented(blocks, &self.ops, &self.cfg.params)?;
        let pre = Preconditioner::new(&sys, &self.cfg)?;
        let setup_seconds = start.elapsed().as_secs_f64();
        let rhs = sys.rhs();
        let krylov = fgmres(
            |v, out| sys.apply(v, out),
            |v, out| pre.apply(&sys, &self.ops, v, out),
            &rhs,
            None,
            &self.krylov,
        )?;
        let solve_seconds = start.elapsed().as_secs_f64() - setup_seconds;
        let b = blocks.rhs();
        let mut ax = vec![0.0; b.len()];
        blocks.apply(&krylov.x, &mut ax)?;
        let r: Vec<f64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
        let nb = norm2(&b);
        let original_residual = if nb > 0.0 { norm2(&r) / nb } else { norm2(&r) };
        Ok(LinearSolveReport {
            x: krylov.x.clone(),
            krylov,
            original_residual,
            setup_seconds,
            solve_seconds,
        })
    }
}

#[cfg(test)]
mod tests;
