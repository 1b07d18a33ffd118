//! Reference-cell tables on `[-1, 1]^2` with 3x3 tensor Gauss quadrature.

use std::sync::OnceLock;

pub const NQ: usize = 9;

/// Basis values and derivatives at the quadrature points. Derivatives are
/// with respect to the reference coordinates.
pub struct ReferenceCell {
    pub points: [(f64, f64); NQ],
    pub weights: [f64; NQ],
    pub q2: [[f64; 9]; NQ],
    pub q2_dxi: [[f64; 9]; NQ],
    pub q2_deta: [[f64; 9]; NQ],
    pub q2_dxixi: [[f64; 9]; NQ],
    pub q2_detaeta: [[f64; 9]; NQ],
    pub q1: [[f64; 4]; NQ],
    pub q1_dxi: [[f64; 4]; NQ],
    pub q1_deta: [[f64; 4]; NQ],
}

pub fn quad1(xi: f64) -> [f64; 3] {
    [0.5 * xi * (xi - 1.0), 1.0 - xi * xi, 0.5 * xi * (xi + 1.0)]
}

pub fn dquad1(xi: f64) -> [f64; 3] {
    [xi - 0.5, -2.0 * xi, xi + 0.5]
}

const DDQUAD1: [f64; 3] = [1.0, -2.0, 1.0];

pub fn lin1(xi: f64) -> [f64; 2] {
    [0.5 * (1.0 - xi), 0.5 * (1.0 + xi)]
}

const DLIN1: [f64; 2] = [-0.5, 0.5];

impl ReferenceCell {
    fn build() -> Self {
        let g = (0.6f64).sqrt();
        let pts1 = [-g, 0.0, g];
        let w1 = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
        let mut cell = ReferenceCell {
            points: [(0.0, 0.0); NQ],
            weights: [0.0; NQ],
            q2: [[0.0; 9]; NQ],
            q2_dxi: [[0.0; 9]; NQ],
            q2_deta: [[0.0; 9]; NQ],
            q2_dxixi: [[0.0; 9]; NQ],
            q2_detaeta: [[0.0; 9]; NQ],
            q1: [[0.0; 4]; NQ],
            q1_dxi: [[0.0; 4]; NQ],
            q1_deta: [[0.0; 4]; NQ],
        };
        for qj in 0..3 {
            for qi in 0..3 {
                let q = qi + 3 * qj;
                let (xi, eta) = (pts1[qi], pts1[qj]);
                cell.points[q] = (xi, eta);
                cell.weights[q] = w1[qi] * w1[qj];
                let (lx, ly) = (quad1(xi), quad1(eta));
                let (dx, dy) = (dquad1(xi), dquad1(eta));
                for b in 0..3 {
                    for a in 0..3 {
                        let k = a + 3 * b;
                        cell.q2[q][k] = lx[a] * ly[b];
                        cell.q2_dxi[q][k] = dx[a] * ly[b];
                        cell.q2_deta[q][k] = lx[a] * dy[b];
                        cell.q2_dxixi[q][k] = DDQUAD1[a] * ly[b];
                        cell.q2_detaeta[q][k] = lx[a] * DDQUAD1[b];
                    }
                }
                let (mx, my) = (lin1(xi), lin1(eta));
                for b in 0..2 {
                    for a in 0..2 {
                        let k = a + 2 * b;
                        cell.q1[q][k] = mx[a] * my[b];
                        cell.q1_dxi[q][k] = DLIN1[a] * my[b];
                        cell.q1_deta[q][k] = mx[a] * DLIN1[b];
                    }
                }
            }
        }
        cell
    }
}

pub fn reference_cell() -> &'static ReferenceCell {
    static CELL: OnceLock<ReferenceCell> = OnceLock::new();
    CELL.get_or_init(ReferenceCell::build)
}

/// Affine map data for a `hx x hy` cell.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub x0: f64,
    pub y0: f64,
    pub hx: f64,
    pub hy: f64,
}

impl CellGeometry {
    #[inline]
    pub fn det(&self) -> f64 {
        0.25 * self.hx * self.hy
    }

    /// `d xi / dx`
    #[inline]
    pub fn sx(&self) -> f64 {
        2.0 / self.hx
    }

    #[inline]
    pub fn sy(&self) -> f64 {
        2.0 / self.hy
    }

    #[inline]
    pub fn map(&self, xi: f64, eta: f64) -> (f64, f64) {
        (
            self.x0 + 0.5 * (xi + 1.0) * self.hx,
            self.y0 + 0.5 * (eta + 1.0) * self.hy,
        )
    }
}
