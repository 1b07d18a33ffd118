use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;
use nalgebra::DMatrix;

/// `scalar * (L ⊗ R)` applied without forming the Kronecker product; `L` is a
/// small dense stage matrix and `R` a sparse spatial operator.
#[derive(Debug, Clone)]
pub struct KronOperator {
    pub left: DMatrix<f64>,
    pub right: SparseMatrix,
    pub scalar: f64,
}

impl KronOperator {
    pub fn new(left: DMatrix<f64>, right: SparseMatrix, scalar: f64) -> Self {
        Self { left, right, scalar }
    }

    pub fn nrows(&self) -> usize {
        self.left.nrows() * self.right.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.left.ncols() * self.right.ncols()
    }

    /// `y = scalar (L ⊗ R) x` using one sparse product per block of `x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.ncols(),
                found: x.len(),
            });
        }
        let (m, n) = (self.right.nrows(), self.right.ncols());
        let products: Vec<Vec<f64>> = x.chunks(n).map(|xj| self.right.apply(xj)).collect();
        let mut y = vec![0.0; self.nrows()];
        for i in 0..self.left.nrows() {
            let yi = &mut y[i * m..(i + 1) * m];
            for (j, rx) in products.iter().enumerate() {
                let c = self.scalar * self.left[(i, j)];
                if c != 0.0 {
                    for (a, b) in yi.iter_mut().zip(rx) {
                        *a += c * b;
                    }
                }
            }
        }
        Ok(y)
    }

    /// Dense materialization, for small instances.
    pub fn to_dense(&self) -> DMatrix<f64> {
        self.left.kronecker(&self.right.to_dense()) * self.scalar
    }
}

/// `(L ⊗ I) x` for a stacked vector with blocks of length `n`.
pub fn kron_identity_apply(left: &DMatrix<f64>, n: usize, x: &[f64], y: &mut [f64]) {
    let s = left.nrows();
    y.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..s {
        for j in 0..left.ncols() {
            let c = left[(i, j)];
            if c != 0.0 {
                let (yi, xj) = (&mut y[i * n..(i + 1) * n], &x[j * n..(j + 1) * n]);
                for (a, b) in yi.iter_mut().zip(xj) {
                    *a += c * b;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::TripletBuilder;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_sparse(rng: &mut ChaCha8Rng, m: usize, n: usize) -> SparseMatrix {
        let mut t = TripletBuilder::new(m, n);
        for i in 0..m {
            for j in 0..n {
                if rng.gen_bool(0.4) {
                    t.push(i, j, rng.gen_range(-1.0..1.0));
                }
            }
        }
        t.build()
    }

    #[test]
    fn identity_factors_scale() {
        let k = KronOperator::new(DMatrix::identity(3, 3), SparseMatrix::identity(4), 2.5);
        let x: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let y = k.apply(&x).unwrap();
        assert!(x.iter().zip(&y).all(|(a, b)| (2.5 * a - b).abs() == 0.0));
    }

    #[test]
    fn matches_dense_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let l = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
        let r = rand_sparse(&mut rng, 5, 5);
        let k = KronOperator::new(l, r, -0.7);
        let x: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = k.apply(&x).unwrap();
        let yd = k.to_dense() * DVector::from_vec(x);
        for i in 0..10 {
            assert!((y[i] - yd[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn mixed_product_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let l1 = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
            let l2 = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
            let r1 = rand_sparse(&mut rng, 4, 6);
            let r2 = rand_sparse(&mut rng, 6, 5);
            let x: Vec<f64> = (0..15).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let inner = KronOperator::new(l2.clone(), r2.clone(), 1.0).apply(&x).unwrap();
            let lhs = KronOperator::new(l1.clone(), r1.clone(), 1.0).apply(&inner).unwrap();
            let rhs = KronOperator::new(&l1 * &l2, r1.matmul(&r2), 1.0).apply(&x).unwrap();
            for i in 0..lhs.len() {
                assert!((lhs[i] - rhs[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn wrong_length_is_rejected() {
        let k = KronOperator::new(DMatrix::identity(2, 2), SparseMatrix::identity(3), 1.0);
        assert!(matches!(k.apply(&[1.0; 5]), Err(Error::DimensionMismatch { expected: 6, found: 5 })));
    }
}
