use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rkns_core::fem::{assemble_mass_p, assemble_mass_u, build_mesh, Rectangle};
use rkns_core::fgmres::{fgmres, KrylovConfig};
use rkns_core::linalg::{ilu0, lu_factor, ChebyshevMass, KronOperator};
use rkns_core::sparse::{dot, norm2};
use rkns_core::{check_order_conditions, make_tableau, Family, SparseMatrix};

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::RadauIIA), Just(Family::Gauss), Just(Family::LobattoIIIC)]
}

/// Random sparse pattern with a dominant diagonal.
fn dominant(n: usize, entries: &[(usize, usize, f64)]) -> SparseMatrix {
    let mut t: Vec<(usize, usize, f64)> = entries.iter().map(|&(i, j, v)| (i % n, j % n, v)).collect();
    let mut rowsum = vec![0.0; n];
    for &(i, _, v) in &t {
        rowsum[i] += v.abs();
    }
    t.extend((0..n).map(|i| (i, i, rowsum[i] + 1.0)));
    SparseMatrix::from_triplets(n, n, t)
}

fn entries() -> impl Strategy<Value = Vec<(usize, usize, f64)>> {
    prop::collection::vec((0usize..64, 0usize..64, -2.0f64..2.0), 0..120)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tableau_rows_sum_to_nodes(f in family(), s in 1usize..=5) {
        prop_assume!(f != Family::LobattoIIIC || s >= 2);
        let t = make_tableau(f, s).unwrap();
        for i in 0..s {
            let row: f64 = (0..s).map(|j| t.a[(i, j)]).sum();
            prop_assert!((row - t.c[i]).abs() < 1e-13);
        }
        prop_assert!((t.b.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        prop_assert!(check_order_conditions(&t, t.order).max_residual < 1e-13);
    }

    #[test]
    fn stability_function_is_bounded_on_negative_axis(f in family(), s in 2usize..=5, z in -50.0f64..0.0) {
        let t = make_tableau(f, s).unwrap();
        prop_assert!(t.stability_function(z).abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn sparse_product_matches_dense(n in 1usize..20, e in entries(), x in prop::collection::vec(-1.0f64..1.0, 20)) {
        let a = dominant(n, &e);
        let x = &x[..n];
        let dense = a.to_dense() * DVector::from_column_slice(x);
        prop_assert!(max_diff(&a.apply(x), dense.as_slice()) < 1e-12);
        let at = a.transpose();
        prop_assert!(max_diff(at.transpose().to_dense().as_slice(), a.to_dense().as_slice()) == 0.0);
        let y: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        prop_assert!((dot(&y, &a.apply(x)) - dot(&at.apply(&y), x)).abs() < 1e-11);
    }

    #[test]
    fn lu_solves_dominant_systems(n in 1usize..40, e in entries(), seed in 0u64..1000) {
        let a = dominant(n, &e);
        let b: Vec<f64> = (0..n).map(|i| ((i as u64 * 7 + seed) % 13) as f64 - 6.0).collect();
        let x = lu_factor(&a).unwrap().solve(&b);
        prop_assert!(norm2(&a.apply(&x).iter().zip(&b).map(|(p, q)| p - q).collect::<Vec<_>>()) <= 1e-10 * (1.0 + norm2(&b)));
    }

    #[test]
    fn ilu0_is_exact_without_fill(n in 2usize..60, lo in -1.0f64..1.0, hi in -1.0f64..1.0) {
        // tridiagonal: the LU factors fit the pattern
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 3.0));
            if i > 0 { t.push((i, i - 1, lo)); }
            if i + 1 < n { t.push((i, i + 1, hi)); }
        }
        let a = SparseMatrix::from_triplets(n, n, t);
        let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let mut z = vec![0.0; n];
        ilu0(&a).unwrap().apply(&b, &mut z);
        prop_assert!(max_diff(&a.apply(&z), &b) < 1e-11);
    }

    #[test]
    fn fgmres_residuals_never_increase(n in 2usize..30, e in entries()) {
        let a = dominant(n, &e);
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).cos()).collect();
        let cfg = KrylovConfig { rel_tol: 1e-10, abs_tol: 1e-300, max_iters: n + 5, ..KrylovConfig::default() };
        let res = fgmres(|v, o| { a.mul_vec(v, o); Ok(()) }, |v, o| { o.copy_from_slice(v); Ok(()) }, &b, None, &cfg).unwrap();
        prop_assert!(res.converged());
        prop_assert!(res.residuals.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        prop_assert!(res.iterations <= n);
    }

    #[test]
    fn kron_operator_matches_dense(s in 1usize..4, n in 1usize..8, e in entries(), scalar in -2.0f64..2.0) {
        let left = DMatrix::from_fn(s, s, |i, j| (i as f64 + 1.0) * 0.3 - j as f64 * 0.5);
        let right = dominant(n, &e);
        let op = KronOperator::new(left.clone(), right.clone(), scalar);
        let x: Vec<f64> = (0..s * n).map(|i| (i as f64).sqrt() - 1.0).collect();
        let dense = left.kronecker(&right.to_dense()) * scalar * DVector::from_vec(x.clone());
        prop_assert!(max_diff(&op.apply(&x).unwrap(), dense.as_slice()) < 1e-11);
    }

    #[test]
    fn chebyshev_is_linear(a in -3.0f64..3.0, c in -3.0f64..3.0) {
        let sp = build_mesh(Rectangle::UNIT_SQUARE, 2).unwrap();
        let cheb = ChebyshevMass::new(&assemble_mass_p(&sp), 20).unwrap();
        let n = cheb.dim();
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).sin()).collect();
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.4).cos()).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + c * q).collect();
        let (mut zx, mut zy, mut zxy) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        cheb.apply(&x, &mut zx);
        cheb.apply(&y, &mut zy);
        cheb.apply(&xy, &mut zxy);
        let comb: Vec<f64> = zx.iter().zip(&zy).map(|(p, q)| a * p + c * q).collect();
        prop_assert!(max_diff(&zxy, &comb) < 1e-10);
    }
}

#[test]
fn mesh_counts_and_mass_totals() {
    for l in 1..=4u32 {
        let sp = build_mesh(Rectangle::REFERENCE_SQUARE, l).unwrap();
        let k = 1usize << l;
        assert_eq!(sp.n_p, (k + 1) * (k + 1));
        assert_eq!(sp.n_u, 2 * (2 * k + 1) * (2 * k + 1));
        // each component integrates 1 over an area-4 domain
        assert!((assemble_mass_u(&sp).sum() - 8.0).abs() < 1e-11);
        assert!((assemble_mass_p(&sp).sum() - 4.0).abs() < 1e-11);
    }
}
