//! Local projection stabilization on disjoint 2x2 macro-cell patches.
//!
//! The fluctuation of the streamline derivative `v . grad phi` is taken
//! against the patch mean, with `v` frozen at the patch centroid.

use super::assembly::geometry;
use super::mesh::FESpaces;
use super::reference::{reference_cell, NQ};
use crate::error::{Error, Result};
use crate::sparse::{SparseMatrix, TripletBuilder};

/// Stabilization weight for a patch of length `h` with wind speed `speed`.
pub fn lps_delta(speed: f64, h: f64, nu: f64) -> f64 {
    let pe = speed * h / (2.0 * nu);
    if pe > 1.0 {
        h / (2.0 * speed) * (1.0 - 1.0 / pe)
    } else {
        0.0
    }
}

/// Assembles `Q_u(w, nu)`, block diagonal over the two velocity components.
pub fn assemble_lps(sp: &FESpaces, w: &[f64], nu: f64) -> Result<SparseMatrix> {
    let (nx, ny) = (sp.mesh.nx, sp.mesh.ny);
    if nx % 2 != 0 || ny % 2 != 0 {
        return Err(Error::OddCellCount { nx, ny });
    }
    if w.len() != sp.n_u {
        return Err(Error::DimensionMismatch {
            expected: sp.n_u,
            found: w.len(),
        });
    }
    let r = reference_cell();
    let h = 2.0 * (sp.mesh.hx * sp.mesh.hy).sqrt();
    let area = 4.0 * sp.mesh.hx * sp.mesh.hy;
    let mut t = TripletBuilder::new(sp.n_u, sp.n_u);
    for py in 0..ny / 2 {
        for px in 0..nx / 2 {
            // the patch centroid is a shared Q2 vertex node
            let centre = (4 * px + 2) + (4 * py + 2) * sp.vnx;
            let v = [w[centre], w[sp.n_vnodes + centre]];
            let speed = v[0].hypot(v[1]);
            let delta = lps_delta(speed, h, nu);
            if delta == 0.0 {
                continue;
            }
            // 25 patch nodes on the local 5x5 lattice
            let mut nodes = [0usize; 25];
            for b in 0..5 {
                for a in 0..5 {
                    nodes[a + 5 * b] = (4 * px + a) + (4 * py + b) * sp.vnx;
                }
            }
            let mut gram = [[0.0; 25]; 25];
            let mut mean = [0.0; 25];
            for (cx, cy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                let cell = sp.cell_index(2 * px + cx, 2 * py + cy);
                let g = geometry(sp, cell);
                let local: Vec<usize> = (0..9)
                    .map(|k| {
                        let (a, b) = (k % 3, k / 3);
                        (2 * cx + a) + 5 * (2 * cy + b)
                    })
                    .collect();
                for q in 0..NQ {
                    let wq = r.weights[q] * g.det();
                    let mut s = [0.0; 9];
                    for k in 0..9 {
                        s[k] = v[0] * g.sx() * r.q2_dxi[q][k] + v[1] * g.sy() * r.q2_deta[q][k];
                    }
                    for i in 0..9 {
                        mean[local[i]] += wq * s[i];
                        for j in 0..9 {
                            gram[local[i]][local[j]] += wq * s[i] * s[j];
                        }
                    }
                }
            }
            for comp in 0..2 {
                let off = comp * sp.n_vnodes;
                for i in 0..25 {
                    for j in 0..25 {
                        let val = delta * (gram[i][j] - mean[i] * mean[j] / area);
                        if val != 0.0 {
                            t.push(off + nodes[i], off + nodes[j], val);
                        }
                    }
                }
            }
        }
    }
    Ok(t.build())
}
