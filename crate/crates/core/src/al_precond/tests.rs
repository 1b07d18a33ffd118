use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::fem::{build_mesh, project_solenoidal, Rectangle};
use crate::linalg::KronOperator;
use crate::stage_system::{ProblemSpec, StepContext, TimeState};
use crate::tableau::{make_tableau, Family};

struct Fixture {
    disc: Discretization,
    blocks: StageBlocks,
}

fn fixture(l: u32, s: usize, convection: bool) -> Fixture {
    let disc = Discretization::new(build_mesh(Rectangle::UNIT_SQUARE, l).unwrap());
    let problem = ProblemSpec {
        nu: 0.02,
        forcing: Arc::new(|x, y, t| [y * (1.0 + t), x * x - y]),
        boundary_rate: Arc::new(|_, _, _, _| [0.0, 0.0]),
        t0: 0.0,
        t_final: 1.0,
        n_steps: 4,
        convection,
        lps: false,
    };
    let tab = make_tableau(Family::RadauIIA, s).unwrap();
    let u = project_solenoidal(&disc.spaces, |x, y| {
        let w = x * x * (1.0 - x) * (1.0 - x) * y * y * (1.0 - y) * (1.0 - y);
        [8.0 * w + 0.3 * y, -4.0 * w + 0.2 * x]
    })
    .unwrap();
    let state = TimeState {
        u,
        p: vec![0.0; disc.spaces.n_p],
        t: 0.0,
        n: 0,
    };
    let ctx = StepContext::new(&disc, &problem, &tab, &state).unwrap();
    let (blocks, _) = ctx.assemble(&ctx.initial_guess()).unwrap();
    Fixture { disc, blocks }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm2(&d) / norm2(b).max(1e-300)
}

fn ops(f: &Fixture) -> PressureOperators {
    PressureOperators::new(&f.disc, WMode::DiagMp).unwrap()
}

fn params(gamma: f64) -> AugmentationParams {
    AugmentationParams {
        gamma,
        w_mode: WMode::DiagMp,
    }
}

fn exact_cfg(gamma: f64, schur: SchurMode) -> PrecondConfig {
    PrecondConfig {
        params: params(gamma),
        velocity: VelocitySolve::FullExact,
        schur,
        form: TriangularForm::Upper,
    }
}

#[test]
fn zero_gamma_leaves_system_unchanged() {
    let f = fixture(2, 2, true);
    let o = ops(&f);
    let sys = build_augmented(&f.blocks, &o, &params(0.0)).unwrap();
    assert_eq!(sys.rhs_u, f.blocks.rhs_u);
    for i in 0..2 {
        for j in 0..2 {
            let d = sys.phi_block(i, j).add(1.0, &f.blocks.phi_block(i, j), -1.0);
            assert_eq!(d.max_abs(), 0.0);
        }
    }
}

#[test]
fn augmented_block_matches_dense_formula() {
    let f = fixture(2, 1, true);
    let o = ops(&f);
    let gamma = 3.0;
    let sys = build_augmented(&f.blocks, &o, &params(gamma)).unwrap();
    let phi = f.blocks.to_sparse().to_dense();
    let su = f.blocks.n_u();
    let phi = phi.view((0, 0), (su, su)).into_owned();
    let psi1 = f.blocks.psi1.to_dense();
    let psi2 = f.blocks.psi2.to_dense();
    let a_inv = f.blocks.a.clone().try_inverse().unwrap();
    let w_inv = DMatrix::from_diagonal(&DVector::from_iterator(o.n_p(), o.mass_p.diagonal().iter().map(|d| 1.0 / d)));
    let wcal_inv = a_inv.kronecker(&w_inv) / f.blocks.dt;
    let expect = phi + &psi1 * wcal_inv * &psi2 * gamma;
    let got = sys.phi_sparse().to_dense();
    assert!((&got - &expect).amax() <= 1e-12 * expect.amax());
    // right-hand side: b^u + gamma Psi1 Wcal^{-1} b^p
    let bp = DVector::from_column_slice(&f.blocks.rhs_p);
    let wcal_inv = a_inv.kronecker(&w_inv) / f.blocks.dt;
    let rhs = DVector::from_column_slice(&f.blocks.rhs_u) + psi1 * wcal_inv * bp * gamma;
    assert!(rel_err(&sys.rhs_u, rhs.as_slice()) < 1e-12);
}

#[test]
fn augmented_and_original_systems_share_solution() {
    let f = fixture(2, 2, true);
    let o = ops(&f);
    let sys = build_augmented(&f.blocks, &o, &params(10.0)).unwrap();
    let x0 = f.blocks.solve_direct().unwrap();
    let a = SparseMatrix::from_dense(&sys.to_dense(), 0.0);
    let x1 = lu_factor(&a).unwrap().solve(&sys.rhs());
    assert!(rel_err(&x1, &x0) < 1e-10, "{:e}", rel_err(&x1, &x0));
}

#[test]
fn sparse_and_dense_augmented_products_agree() {
    let f = fixture(2, 2, true);
    let o = ops(&f);
    let sys = build_augmented(&f.blocks, &o, &params(1.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_vec(&mut rng, sys.dim());
    let mut y = vec![0.0; x.len()];
    sys.apply(&x, &mut y).unwrap();
    let yd = sys.to_dense() * DVector::from_column_slice(&x);
    assert!(rel_err(&y, yd.as_slice()) < 1e-13);
}

#[test]
fn full_mp_guard() {
    let disc = Discretization::new(build_mesh(Rectangle::UNIT_SQUARE, 5).unwrap());
    assert!(matches!(PressureOperators::new(&disc, WMode::FullMp), Err(Error::FullMpTooLarge(1088, FULL_MP_LIMIT))));
}

#[test]
fn full_mp_smw_identity() {
    let f = fixture(2, 2, false);
    let o = PressureOperators::new(&f.disc, WMode::FullMp).unwrap();
    let err = verify_smw_identity(&f.blocks, &o, 1.0).unwrap();
    assert!(err < 1e-9, "{err:e}");
    let err = kronecker_collapse_error(&f.blocks, &o, 2.0).unwrap();
    assert!(err < 1e-12, "{err:e}");
}

#[test]
fn gauss_seidel_single_stage_is_exact() {
    let f = fixture(2, 1, true);
    let o = ops(&f);
    let sys = build_augmented(&f.blocks, &o, &params(1.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let r = random_vec(&mut rng, sys.n_u());
    let z = apply_gauss_seidel_11(&sys, &GsConfig::default(), &r).unwrap();
    let expect = sys.phi_block(0, 0).to_dense().lu().solve(&DVector::from_column_slice(&r)).unwrap();
    assert!(rel_err(&z, expect.as_slice()) < 1e-12);
}

#[test]
fn gauss_seidel_is_exact_on_block_lower_triangular() {
    let mut f = fixture(2, 2, true);
    f.blocks.a = DMatrix::from_row_slice(2, 2, &[0.4, 0.0, 0.3, 0.5]);
    f.blocks.psi1.left = f.blocks.a.clone();
    f.blocks.psi2.left = f.blocks.a.clone();
    let o = ops(&f);
    let sys = build_augmented(&f.blocks, &o, &params(1.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let r = random_vec(&mut rng, 2 * sys.n_u());
    let z = apply_gauss_seidel_11(&sys, &GsConfig::default(), &r).unwrap();
    let expect = sys.phi_sparse().to_dense().lu().solve(&DVector::from_column_slice(&r)).unwrap();
    assert!(rel_err(&z, expect.as_slice()) < 1e-12);
}

#[test]
fn gauss_seidel_sweep_matches_dense_lower_solve() {
    let f = fixture(2, 2, true);
    let o = ops(&f);
    let sys = build_augmented(&f.blocks, &o, &params(1.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let r = random_vec(&mut rng, 2 * sys.n_u());
    let z = apply_gauss_seidel_11(&sys, &GsConfig::default(), &r).unwrap();
    let mut dl = sys.phi_sparse().to_dense();
    let n = sys.n_u();
    dl.view_mut((0, n), (n, n)).fill(0.0);
    let expect = dl.lu().solve(&DVector::from_column_slice(&r)).unwrap();
    assert!(rel_err(&z, expect.as_slice()) < 1e-12);
}

#[test]
fn gauss_seidel_rejects_zero_sweeps() {
    let f = fixture(1, 1, false);
    let o = ops(&f);
    let sys = build_augmented(&f.blocks, &o, &params(1.0)).unwrap();
    let cfg = GsConfig {
        sweeps: 0,
        ..GsConfig::default()
    };
    assert!(matches!(GaussSeidel::new(&sys, &cfg), Err(Error::Config(_))));
}

#[test]
fn schur_of_zero_is_zero() {
    let f = fixture(2, 2, true);
    let o = ops(&f);
    let sys = build_augmented(&f.blocks, &o, &params(1.0)).unwrap();
    let s = SchurApprox::new(&sys, SchurMode::Approximate).unwrap();
    let z = apply_schur_inverse(&s, &o, &vec![0.0; 2 * o.n_p()]);
    assert!(z.iter().all(|&v| v == 0.0));
}

#[test]
fn exact_inner_schur_matches_dense_formula() {
    let f = fixture(2, 2, true);
    let o = ops(&f);
    let gamma = 2.5;
    let sys = build_augmented(&f.blocks, &o, &params(gamma)).unwrap();
    let s = SchurApprox::new(&sys, SchurMode::ExactInner).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let r = random_vec(&mut rng, 2 * o.n_p());
    let z = apply_schur_inverse(&s, &o, &r);

    let (dt, nu) = (f.blocks.dt, f.blocks.nu);
    let a = f.blocks.a.clone();
    let a_inv = a.clone().try_inverse().unwrap();
    let kept = &f.disc.kept_p;
    let kp_inv = f.disc.stiff_p.submatrix(kept, kept).to_dense().try_inverse().unwrap();
    let mp = f.disc.mass_p.submatrix(kept, kept).to_dense();
    let w_inv = DMatrix::from_diagonal(&mp.diagonal().map(|d| 1.0 / d));
    let mp_inv = mp.try_inverse().unwrap();
    let ip = DMatrix::<f64>::identity(o.n_p(), o.n_p());
    let ai = a_inv.kronecker(&ip);
    let inner = DMatrix::<f64>::identity(2, 2).kronecker(&kp_inv) + a.kronecker(&mp_inv) * (nu * dt);
    let dense = a_inv.kronecker(&w_inv) * (gamma / dt) + &ai * inner * &ai / (dt * dt);
    let expect = dense * DVector::from_column_slice(&r);
    assert!(rel_err(&z, expect.as_slice()) < 1e-11, "{:e}", rel_err(&z, expect.as_slice()));
}

#[test]
fn approximate_schur_is_close_to_exact_inner() {
    let f = fixture(3, 2, true);
    let o = ops(&f);
    let sys = build_augmented(&f.blocks, &o, &params(1.0)).unwrap();
    let approx = SchurApprox::new(&sys, SchurMode::Approximate).unwrap();
    let exact = SchurApprox::new(&sys, SchurMode::ExactInner).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let r = random_vec(&mut rng, 2 * o.n_p());
    let za = apply_schur_inverse(&approx, &o, &r);
    let ze = apply_schur_inverse(&exact, &o, &r);
    assert!(rel_err(&za, &ze) < 0.1, "{:e}", rel_err(&za, &ze));
}

#[test]
fn schur_approximation_regression_baseline() {
    // || S~^{-1} S_gamma - I ||_2 for the Stokes system, one stage, exact
    // inner solves
    let f = fixture(2, 1, false);
    let o = ops(&f);
    let sys = build_augmented(&f.blocks, &o, &params(1.0)).unwrap();
    let s_gamma = schur::dense_schur(&sys).unwrap();
    let approx = SchurApprox::new(&sys, SchurMode::ExactInner).unwrap();
    let n = o.n_p();
    let mut prod = DMatrix::zeros(n, n);
    for j in 0..n {
        let col: Vec<f64> = s_gamma.column(j).iter().copied().collect();
        prod.set_column(j, &DVector::from_vec(apply_schur_inverse(&approx, &o, &col)));
    }
    let err = (prod - DMatrix::<f64>::identity(n, n)).singular_values().max();
    eprintln!("||S~^-1 S_gamma - I||_2 = {err:.4e}");
    assert!(err.is_finite() && err < 1.0, "{err:e}");
}

#[test]
fn ideal_preconditioner_converges_in_two_iterations() {
    let f = fixture(2, 2, false);
    let o = ops(&f);
    for form in [TriangularForm::Upper, TriangularForm::Lower] {
        let cfg = PrecondConfig {
            form,
            ..exact_cfg(1.0, SchurMode::TrueDense)
        };
        let krylov = KrylovConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-300,
            max_iters: 20,
            ..KrylovConfig::default()
        };
        let solver = AugmentedSolver {
            ops: o.clone(),
            cfg,
            krylov,
        };
        let rep = solver.solve(&f.blocks).unwrap();
        assert!(rep.krylov.converged());
        assert!(rep.krylov.iterations <= 2, "{form:?}: {}", rep.krylov.iterations);
    }
}

#[test]
fn zero_gamma_matches_hand_rolled_block_solve() {
    let f = fixture(2, 1, false);
    let o = ops(&f);
    let sys = build_augmented(&f.blocks, &o, &params(0.0)).unwrap();
    let cfg = PrecondConfig {
        velocity: VelocitySolve::GaussSeidel(GsConfig::default()),
        ..exact_cfg(0.0, SchurMode::TrueDense)
    };
    let pre = Preconditioner::new(&sys, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let r = random_vec(&mut rng, sys.dim());
    let z = apply_preconditioner(&sys, &o, &pre, &r).unwrap();

    let n = sys.n_u();
    let full = f.blocks.to_sparse().to_dense();
    let phi = full.view((0, 0), (n, n)).into_owned();
    let bt = full.view((0, n), (n, o.n_p())).into_owned();
    let b = full.view((n, 0), (o.n_p(), n)).into_owned();
    let phi_inv = phi.try_inverse().unwrap();
    let schur = &b * &phi_inv * &bt;
    let ru = DVector::from_column_slice(&r[..n]);
    let rp = DVector::from_column_slice(&r[n..]);
    let zp = -schur.lu().solve(&rp).unwrap();
    let zu = &phi_inv * (ru - &bt * &zp);
    assert!(rel_err(&z[..n], zu.as_slice()) < 1e-10);
    assert!(rel_err(&z[n..], zp.as_slice()) < 1e-10);
}

#[test]
fn preconditioner_is_linear() {
    let f = fixture(2, 2, true);
    let o = ops(&f);
    let sys = build_augmented(&f.blocks, &o, &params(1.0)).unwrap();
    let pre = Preconditioner::new(&sys, &PrecondConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let r = random_vec(&mut rng, sys.dim());
    let z = apply_preconditioner(&sys, &o, &pre, &r).unwrap();
    let r3: Vec<f64> = r.iter().map(|v| -3.0 * v).collect();
    let z3 = apply_preconditioner(&sys, &o, &pre, &r3).unwrap();
    let expect: Vec<f64> = z.iter().map(|v| -3.0 * v).collect();
    assert!(rel_err(&z3, &expect) < 1e-12);
}

#[test]
fn default_solver_solves_navier_stokes_system() {
    let f = fixture(3, 2, true);
    for diag in [DiagSolve::ExactLu, DiagSolve::InexactIluGmres { iterations: 10 }] {
        let cfg = PrecondConfig {
            velocity: VelocitySolve::GaussSeidel(GsConfig { sweeps: 1, diag }),
            ..PrecondConfig::default()
        };
        let solver = AugmentedSolver::new(&f.disc, cfg, KrylovConfig::default()).unwrap();
        let rep = solver.solve(&f.blocks).unwrap();
        assert!(rep.krylov.converged(), "{diag:?}");
        eprintln!("{diag:?}: {} iterations", rep.krylov.iterations);
        assert!(rep.krylov.iterations < 100, "{diag:?}: {}", rep.krylov.iterations);
        let direct = f.blocks.solve_direct().unwrap();
        assert!(rel_err(&rep.x, &direct) < 1e-3);
    }
}

#[test]
fn smw_identity_on_toy_blocks() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (n, m) = (8, 3);
    let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let phi = &g * g.transpose() + DMatrix::identity(n, n) * n as f64;
    let b = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
    let h = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
    let w = &h * h.transpose() + DMatrix::identity(m, m);
    let w_inv = w.try_inverse().unwrap();
    for gamma in [0.0, 0.5, 20.0] {
        let err = smw_error_dense(&phi, &b.transpose(), &b, &w_inv, gamma).unwrap();
        assert!(err < 1e-10, "gamma={gamma}: {err:e}");
    }
}

#[test]
fn smw_identity_on_stokes_stage_systems() {
    for s in [1, 2] {
        let f = fixture(2, s, false);
        let o = ops(&f);
        for gamma in [1e-12, 1.0, 100.0] {
            let err = verify_smw_identity(&f.blocks, &o, gamma).unwrap();
            let tol = if gamma < 1e-6 { 1e-10 } else { 1e-9 };
            assert!(err < tol, "s={s} gamma={gamma}: {err:e}");
        }
    }
}

#[test]
fn smw_reports_singular_inner_matrix() {
    // without pinning, B has the constant pressure mode in its left kernel
    let f = fixture(2, 1, false);
    let o = ops(&f);
    let full = f.disc.div.submatrix(&(0..f.disc.spaces.n_p).collect::<Vec<_>>(), &f.disc.free);
    let mut blocks = f.blocks.clone();
    blocks.psi1 = KronOperator::new(blocks.a.clone(), full.transpose(), blocks.dt);
    blocks.psi2 = KronOperator::new(blocks.a.clone(), full, blocks.dt);
    let (phi, psi1, psi2) = {
        let d = blocks.to_sparse().to_dense();
        let n = blocks.n_u();
        let m = blocks.n_p();
        (
            d.view((0, 0), (n, n)).into_owned(),
            d.view((0, n), (n, m)).into_owned(),
            d.view((n, 0), (m, n)).into_owned(),
        )
    };
    let w_inv = DMatrix::identity(blocks.n_p(), blocks.n_p());
    let _ = o;
    assert!(matches!(smw_error_dense(&phi, &psi1, &psi2, &w_inv, 1.0), Err(Error::SingularInner(_))));
}

#[test]
fn kronecker_collapse_identity() {
    for s in [1, 2, 3] {
        let f = fixture(2, s, true);
        let o = ops(&f);
        let err = kronecker_collapse_error(&f.blocks, &o, 7.0).unwrap();
        assert!(err < 1e-12, "s={s}: {err:e}");
    }
}

#[test]
fn schur_factorization_identity() {
    let f = fixture(2, 2, true);
    let err = factorization_identity_error(&f.blocks).unwrap();
    assert!(err < 1e-11, "{err:e}");
}

#[test]
fn preconditioned_spectrum_lies_in_right_half_plane() {
    let f = fixture(1, 2, false);
    let o = ops(&f);
    let sys = build_augmented(&f.blocks, &o, &params(1.0)).unwrap();
    let pre = Preconditioner::new(&sys, &PrecondConfig::default()).unwrap();
    let eig = preconditioned_eigenvalues(&sys, &o, &pre).unwrap();
    assert_eq!(eig.len(), sys.dim());
    assert!(eig.iter().all(|z| z.re > 0.0 && z.re.is_finite()));
    let mut buf = Vec::new();
    write_eigenvalues_csv(&mut buf, &eig).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), eig.len() + 1);
    assert_eq!(text.lines().next(), Some("re,im"));
}

#[test]
fn mismatched_w_mode_is_rejected() {
    let f = fixture(1, 1, false);
    let o = ops(&f);
    let p = AugmentationParams {
        gamma: 1.0,
        w_mode: WMode::FullMp,
    };
    assert!(matches!(build_augmented(&f.blocks, &o, &p), Err(Error::Config(_))));
}
