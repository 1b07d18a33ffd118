//! Runge-Kutta stage equations for the semi-discrete Navier-Stokes system,
//! their Newton linearization, and the time loop.
//!
//! Unknowns of one step are the stage rates `Y^u_i`, `Y^p_i`. Dirichlet
//! velocity dofs carry the time derivative of the boundary data and are
//! eliminated from the Newton system, as is the first pressure dof, which
//! fixes the hydrostatic mode.

mod newton;
mod time_loop;

pub use newton::{newton_solve, LinearSolver, NewtonOutcome};
pub use time_loop::{time_loop, write_snapshot, RunStatistics, TimeLoopOptions, Trajectory};

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fem::{
    assemble_convection, assemble_convection_jacobian, assemble_divergence, assemble_load, assemble_lps,
    assemble_mass_p, assemble_mass_u, assemble_pressure_poisson_rhs, assemble_stiffness_p, assemble_stiffness_u,
    FESpaces,
};
use crate::linalg::{lu_factor, KronOperator};
use crate::sparse::{norm2, SparseMatrix, TripletBuilder};
use crate::tableau::ButcherTableau;

/// `f(x, y, t)`
pub type VectorField = Arc<dyn Fn(f64, f64, f64) -> [f64; 2] + Send + Sync>;
/// Time derivative of the Dirichlet data, `(x, y, t_stage, t_n)`; the step
/// start is passed so piecewise data can be evaluated on the correct side of
/// a kink that coincides with a step boundary.
pub type BoundaryRate = Arc<dyn Fn(f64, f64, f64, f64) -> [f64; 2] + Send + Sync>;

#[derive(Clone)]
pub struct ProblemSpec {
    pub nu: f64,
    pub forcing: VectorField,
    pub boundary_rate: BoundaryRate,
    pub t0: f64,
    pub t_final: f64,
    pub n_steps: usize,
    /// `false` drops the convection terms (Stokes).
    pub convection: bool,
    pub lps: bool,
}

impl ProblemSpec {
    pub fn dt(&self) -> f64 {
        if self.n_steps == 0 {
            0.0
        } else {
            (self.t_final - self.t0) / self.n_steps as f64
        }
    }
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("nu", &self.nu)
            .field("t0", &self.t0)
            .field("t_final", &self.t_final)
            .field("n_steps", &self.n_steps)
            .field("convection", &self.convection)
            .field("lps", &self.lps)
            .finish_non_exhaustive()
    }
}

/// Mesh-dependent operators, assembled once.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub spaces: FESpaces,
    pub mass_u: SparseMatrix,
    pub stiff_u: SparseMatrix,
    pub div: SparseMatrix,
    pub mass_p: SparseMatrix,
    pub stiff_p: SparseMatrix,
    /// Velocity dofs that are Newton unknowns.
    pub free: Vec<usize>,
    /// Pressure dofs that are Newton unknowns (all but `pin`).
    pub kept_p: Vec<usize>,
    pub pin: usize,
    /// `M_u`, `K_u`, `B` restricted to the unknowns.
    pub mass_r: SparseMatrix,
    pub stiff_r: SparseMatrix,
    pub div_r: SparseMatrix,
}

impl Discretization {
    pub fn new(spaces: FESpaces) -> Self {
        let mass_u = assemble_mass_u(&spaces);
        let stiff_u = assemble_stiffness_u(&spaces);
        let div = assemble_divergence(&spaces);
        let mass_p = assemble_mass_p(&spaces);
        let stiff_p = assemble_stiffness_p(&spaces);
        let free = spaces.free_velocity_dofs();
        let pin = 0;
        let kept_p: Vec<usize> = (0..spaces.n_p).filter(|&i| i != pin).collect();
        let mass_r = mass_u.submatrix(&free, &free);
        let stiff_r = stiff_u.submatrix(&free, &free);
        let div_r = div.submatrix(&kept_p, &free);
        Self {
            spaces,
            mass_u,
            stiff_u,
            div,
            mass_p,
            stiff_p,
            free,
            kept_p,
            pin,
            mass_r,
            stiff_r,
            div_r,
        }
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn n_kept_p(&self) -> usize {
        self.kept_p.len()
    }

    /// Unknowns of an `s`-stage Newton system.
    pub fn stage_dofs(&self, s: usize) -> usize {
        s * (self.n_free() + self.n_kept_p())
    }

    /// Euclidean norm of `B u`.
    pub fn divergence_norm(&self, u: &[f64]) -> f64 {
        norm2(&self.div.apply(u))
    }

    /// Pressure normalized to zero mean.
    pub fn zero_mean(&self, p: &[f64]) -> Vec<f64> {
        let ones = vec![1.0; p.len()];
        let mo = self.mass_p.apply(&ones);
        let mean = crate::sparse::dot(&mo, p) / mo.iter().sum::<f64>();
        p.iter().map(|v| v - mean).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeState {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
    pub n: usize,
}

/// Stage rates, one full-length vector per stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageVector {
    pub u: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
}

impl StageVector {
    pub fn zeros(s: usize, n_u: usize, n_p: usize) -> Self {
        Self {
            u: vec![vec![0.0; n_u]; s],
            p: vec![vec![0.0; n_p]; s],
        }
    }

    pub fn stages(&self) -> usize {
        self.u.len()
    }
}

/// `w_i = x_n + dt sum_j a_ij Y_j` for velocity and pressure.
#[derive(Debug, Clone, PartialEq)]
pub struct StageAuxiliary {
    pub u: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
}

fn stage_combination(a: &DMatrix<f64>, dt: f64, base: &[f64], y: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..y.len())
        .map(|i| {
            let mut w = base.to_vec();
            for (j, yj) in y.iter().enumerate() {
                let c = dt * a[(i, j)];
                if c != 0.0 {
                    w.iter_mut().zip(yj).for_each(|(wk, yk)| *wk += c * yk);
                }
            }
            w
        })
        .collect()
}

impl StageAuxiliary {
    pub fn compute(state: &TimeState, y: &StageVector, a: &DMatrix<f64>, dt: f64) -> Self {
        Self {
            u: stage_combination(a, dt, &state.u, &y.u),
            p: stage_combination(a, dt, &state.p, &y.p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iters: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-5,
            abs_tol: 1e-12,
            max_iters: 20,
        }
    }
}

/// One linearized stage system on the reduced unknowns:
///
/// ```text
/// [ Phi   Psi1 ] [du]   [rhs_u]
/// [ Psi2   0   ] [dp] = [rhs_p]
/// ```
///
/// with `Phi_ij = delta_ij M + dt a_ij L_i`, `Psi1 = dt A ⊗ B^T` and
/// `Psi2 = dt A ⊗ B`.
#[derive(Debug, Clone)]
pub struct StageBlocks {
    pub dt: f64,
    pub nu: f64,
    pub a: DMatrix<f64>,
    pub mass: SparseMatrix,
    pub l_blocks: Vec<SparseMatrix>,
    pub psi1: KronOperator,
    pub psi2: KronOperator,
    pub rhs_u: Vec<f64>,
    pub rhs_p: Vec<f64>,
}

impl StageBlocks {
    pub fn stages(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.mass.nrows()
    }

    pub fn n_p(&self) -> usize {
        self.psi2.right.nrows()
    }

    pub fn dim(&self) -> usize {
        self.stages() * (self.n_u() + self.n_p())
    }

    /// Divergence block `B` on the reduced unknowns.
    pub fn div(&self) -> &SparseMatrix {
        &self.psi2.right
    }

    pub fn rhs(&self) -> Vec<f64> {
        let mut r = self.rhs_u.clone();
        r.extend_from_slice(&self.rhs_p);
        r
    }

    /// `Phi_ij` as a sparse matrix.
    pub fn phi_block(&self, i: usize, j: usize) -> SparseMatrix {
        let c = self.dt * self.a[(i, j)];
        if i == j {
            self.mass.add(1.0, &self.l_blocks[i], c)
        } else {
            self.l_blocks[i].scaled(c)
        }
    }

    /// `y = Phi x` for a stacked velocity vector.
    pub fn apply_phi(&self, x: &[f64], y: &mut [f64]) {
        apply_block_rows(&self.mass, &self.l_blocks, &self.a, self.dt, x, y);
    }

    /// Product with the whole saddle-point matrix.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let su = self.stages() * self.n_u();
        let (xu, xp) = x.split_at(su);
        let (yu, yp) = y.split_at_mut(su);
        self.apply_phi(xu, yu);
        let t = self.psi1.apply(xp)?;
        yu.iter_mut().zip(&t).for_each(|(a, b)| *a += b);
        yp.copy_from_slice(&self.psi2.apply(xu)?);
        Ok(())
    }

    /// The whole saddle-point matrix in sparse form.
    pub fn to_sparse(&self) -> SparseMatrix {
        let (s, nu, np) = (self.stages(), self.n_u(), self.n_p());
        let n = self.dim();
        let mut t = TripletBuilder::new(n, n);
        let bt = self.div().transpose();
        for i in 0..s {
            for j in 0..s {
                push_block(&mut t, &self.phi_block(i, j), i * nu, j * nu, 1.0);
                let c = self.dt * self.a[(i, j)];
                if c != 0.0 {
                    push_block(&mut t, &bt, i * nu, s * nu + j * np, c);
                    push_block(&mut t, self.div(), s * nu + i * np, j * nu, c);
                }
            }
        }
        t.build()
    }

    /// Solves the system with a sparse direct factorization.
    pub fn solve_direct(&self) -> Result<Vec<f64>> {
        Ok(lu_factor(&self.to_sparse())?.solve(&self.rhs()))
    }
}

pub(crate) fn push_block(t: &mut TripletBuilder, m: &SparseMatrix, r0: usize, c0: usize, scale: f64) {
    for i in 0..m.nrows() {
        let (cols, vals) = m.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            t.push(r0 + i, c0 + j, scale * v);
        }
    }
}

/// `y_i = M x_i + dt L_i sum_j a_ij x_j`
pub(crate) fn apply_block_rows(
    mass: &SparseMatrix,
    l_blocks: &[SparseMatrix],
    a: &DMatrix<f64>,
    dt: f64,
    x: &[f64],
    y: &mut [f64],
) {
    let n = mass.nrows();
    let s = l_blocks.len();
    let mut comb = vec![0.0; n];
    for i in 0..s {
        let yi = &mut y[i * n..(i + 1) * n];
        mass.mul_vec(&x[i * n..(i + 1) * n], yi);
        comb.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..s {
            let c = dt * a[(i, j)];
            if c != 0.0 {
                comb.iter_mut().zip(&x[j * n..(j + 1) * n]).for_each(|(a, b)| *a += c * b);
            }
        }
        l_blocks[i].mul_vec_add(1.0, &comb, yi);
    }
}

/// Data of one time step that stays fixed across Newton iterations.
pub struct StepContext<'a> {
    pub disc: &'a Discretization,
    pub problem: &'a ProblemSpec,
    pub tableau: &'a ButcherTableau,
    pub state: &'a TimeState,
    pub dt: f64,
    loads: Vec<Vec<f64>>,
    lps: Option<SparseMatrix>,
}

impl<'a> StepContext<'a> {
    /// Evaluates the stage loads and, when enabled, the stabilization with
    /// the wind frozen at `u_n`.
    pub fn new(disc: &'a Discretization, problem: &'a ProblemSpec, tableau: &'a ButcherTableau, state: &'a TimeState) -> Result<Self> {
        let dt = problem.dt();
        let sp = &disc.spaces;
        let loads = tableau
            .c
            .iter()
            .map(|&ci| {
                let t = state.t + ci * dt;
                let f = problem.forcing.clone();
                assemble_load(sp, move |x, y| f(x, y, t))
            })
            .collect();
        let lps = if problem.lps && problem.convection {
            Some(assemble_lps(sp, &state.u, problem.nu)?)
        } else {
            None
        };
        Ok(Self {
            disc,
            problem,
            tableau,
            state,
            dt,
            loads,
            lps,
        })
    }

    pub fn stages(&self) -> usize {
        self.tableau.stages
    }

    /// Boundary rates on the Dirichlet dofs, zero elsewhere.
    pub fn initial_guess(&self) -> StageVector {
        let sp = &self.disc.spaces;
        let mut y = StageVector::zeros(self.stages(), sp.n_u, sp.n_p);
        let dirichlet = sp.dirichlet_dofs();
        for (i, yi) in y.u.iter_mut().enumerate() {
            let ts = self.state.t + self.tableau.c[i] * self.dt;
            for &d in &dirichlet {
                let (node, comp) = (d % sp.n_vnodes, d / sp.n_vnodes);
                let (x, yy) = sp.velocity_node_coords(node);
                yi[d] = (self.problem.boundary_rate)(x, yy, ts, self.state.t)[comp];
            }
        }
        y
    }

    pub fn auxiliary(&self, y: &StageVector) -> StageAuxiliary {
        StageAuxiliary::compute(self.state, y, &self.tableau.a, self.dt)
    }

    /// Nonlinear stage residual on the reduced unknowns, stacked as
    /// `[F^u_1..F^u_s, F^p_1..F^p_s]`.
    pub fn residual(&self, y: &StageVector) -> Result<Vec<f64>> {
        let w = self.auxiliary(y);
        self.residual_with(y, &w)
    }

    fn residual_with(&self, y: &StageVector, w: &StageAuxiliary) -> Result<Vec<f64>> {
        let d = self.disc;
        let s = self.stages();
        let (nf, nq) = (d.n_free(), d.n_kept_p());
        let mut out = vec![0.0; s * (nf + nq)];
        let bt = d.div.transpose();
        for i in 0..s {
            let mut r = d.mass_u.apply(&y.u[i]);
            d.stiff_u.mul_vec_add(self.problem.nu, &w.u[i], &mut r);
            if self.problem.convection {
                assemble_convection(&d.spaces, &w.u[i])?.mul_vec_add(1.0, &w.u[i], &mut r);
            }
            if let Some(q) = &self.lps {
                q.mul_vec_add(1.0, &w.u[i], &mut r);
            }
            bt.mul_vec_add(1.0, &w.p[i], &mut r);
            for (k, &dof) in d.free.iter().enumerate() {
                out[i * nf + k] = r[dof] - self.loads[i][dof];
            }
            let c = d.div.apply(&w.u[i]);
            for (k, &dof) in d.kept_p.iter().enumerate() {
                out[s * nf + i * nq + k] = c[dof];
            }
        }
        Ok(out)
    }

    /// `L_i = nu K + N(w_i) + H(w_i) (+ Q)` restricted to the unknowns.
    pub fn linearized_operator(&self, w: &[f64]) -> Result<SparseMatrix> {
        let d = self.disc;
        let mut l = d.stiff_u.scaled(self.problem.nu);
        if self.problem.convection {
            let n = assemble_convection(&d.spaces, w)?;
            let h = assemble_convection_jacobian(&d.spaces, w)?;
            l = l.add(1.0, &n.add(1.0, &h, 1.0), 1.0);
        }
        if let Some(q) = &self.lps {
            l = l.add(1.0, q, 1.0);
        }
        Ok(l.submatrix(&d.free, &d.free))
    }

    /// Newton system at the iterate `y`; the right-hand side is the negative
    /// nonlinear residual. Also returns the residual norm.
    pub fn assemble(&self, y: &StageVector) -> Result<(StageBlocks, f64)> {
        let res = self.residual(y)?;
        let norm = norm2(&res);
        Ok((self.jacobian(y, &res)?, norm))
    }

    /// Newton system at `y` given its already evaluated residual.
    pub fn jacobian(&self, y: &StageVector, residual: &[f64]) -> Result<StageBlocks> {
        let w = self.auxiliary(y);
        let s = self.stages();
        let nf = self.disc.n_free();
        let l_blocks = w.u.iter().map(|wi| self.linearized_operator(wi)).collect::<Result<Vec<_>>>()?;
        let a = self.tableau.a.clone();
        let bt = self.disc.div_r.transpose();
        Ok(StageBlocks {
            dt: self.dt,
            nu: self.problem.nu,
            psi1: KronOperator::new(a.clone(), bt, self.dt),
            psi2: KronOperator::new(a.clone(), self.disc.div_r.clone(), self.dt),
            a,
            mass: self.disc.mass_r.clone(),
            l_blocks,
            rhs_u: residual[..s * nf].iter().map(|v| -v).collect(),
            rhs_p: residual[s * nf..].iter().map(|v| -v).collect(),
        })
    }

    /// Adds a reduced correction to the full stage vectors.
    pub fn apply_correction(&self, y: &mut StageVector, delta: &[f64]) {
        let d = self.disc;
        let s = self.stages();
        let (nf, nq) = (d.n_free(), d.n_kept_p());
        for i in 0..s {
            for (k, &dof) in d.free.iter().enumerate() {
                y.u[i][dof] += delta[i * nf + k];
            }
            for (k, &dof) in d.kept_p.iter().enumerate() {
                y.p[i][dof] += delta[s * nf + i * nq + k];
            }
        }
    }
}

/// Assembles the Newton system of one step at the iterate `y`.
pub fn assemble_newton_system(ctx: &StepContext<'_>, y: &StageVector) -> Result<StageBlocks> {
    Ok(ctx.assemble(y)?.0)
}

/// `x_{n+1} = x_n + dt sum_i b_i Y_i` for velocity and pressure.
pub fn rk_update(state: &TimeState, y: &StageVector, tableau: &ButcherTableau, dt: f64) -> TimeState {
    let mut u = state.u.clone();
    let mut p = state.p.clone();
    for (i, &bi) in tableau.b.iter().enumerate() {
        u.iter_mut().zip(&y.u[i]).for_each(|(a, v)| *a += dt * bi * v);
        p.iter_mut().zip(&y.p[i]).for_each(|(a, v)| *a += dt * bi * v);
    }
    TimeState {
        u,
        p,
        t: state.t + dt,
        n: state.n + 1,
    }
}

/// Divergence tolerance for initial data.
pub const DIV_TOL: f64 = 1e-8;

fn pressure_rhs(disc: &Discretization, u0: &[f64], problem: &ProblemSpec, t0: f64) -> Result<Vec<f64>> {
    let f = problem.forcing.clone();
    assemble_pressure_poisson_rhs(&disc.spaces, u0, problem.nu, problem.convection, move |x, y| f(x, y, t0))
}

/// Pressure consistent with a solenoidal velocity: solves the weak Poisson
/// problem `(grad p, grad psi) = (f + nu lap u - (u . grad) u, grad psi)` with
/// the pinned dof removed, then shifts to zero mean.
pub fn consistent_pressure(disc: &Discretization, u0: &[f64], problem: &ProblemSpec, t0: f64) -> Result<Vec<f64>> {
    let div = disc.divergence_norm(u0);
    if div >= DIV_TOL {
        return Err(Error::NotSolenoidal(div));
    }
    let rhs = pressure_rhs(disc, u0, problem, t0)?;
    let kr = disc.stiff_p.submatrix(&disc.kept_p, &disc.kept_p);
    let rr: Vec<f64> = disc.kept_p.iter().map(|&i| rhs[i]).collect();
    let x = lu_factor(&kr)?.solve(&rr);
    let mut p = vec![0.0; disc.spaces.n_p];
    for (k, &i) in disc.kept_p.iter().enumerate() {
        p[i] = x[k];
    }
    Ok(disc.zero_mean(&p))
}

/// Relative residual `||K_p p - rhs|| / ||rhs||` of a consistent pressure
/// (absolute when the right-hand side vanishes).
pub fn pressure_poisson_residual(disc: &Discretization, u0: &[f64], p0: &[f64], problem: &ProblemSpec, t0: f64) -> Result<f64> {
    let rhs = pressure_rhs(disc, u0, problem, t0)?;
    let kp = disc.stiff_p.apply(p0);
    let r: Vec<f64> = kp.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let nb = norm2(&rhs);
    Ok(if nb == 0.0 { norm2(&r) } else { norm2(&r) / nb })
}
