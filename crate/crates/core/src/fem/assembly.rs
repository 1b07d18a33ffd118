//! Element loops for the Taylor-Hood operators.
//!
//! All matrices are sums of element contributions collected as triplets, so
//! the result does not depend on the cell traversal order beyond rounding.

use super::mesh::FESpaces;
use super::reference::{reference_cell, CellGeometry, NQ};
use crate::error::{Error, Result};
use crate::sparse::{SparseMatrix, TripletBuilder};

pub(crate) fn geometry(sp: &FESpaces, cell: usize) -> CellGeometry {
    let (ex, ey) = (cell % sp.mesh.nx, cell / sp.mesh.nx);
    let (x0, y0) = sp.mesh.cell_origin(ex, ey);
    CellGeometry {
        x0,
        y0,
        hx: sp.mesh.hx,
        hy: sp.mesh.hy,
    }
}

fn natural_order(sp: &FESpaces) -> Vec<usize> {
    (0..sp.mesh.cells()).collect()
}

fn check_len(v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: v.len(),
        });
    }
    Ok(())
}

/// Physical gradients of the Q2 basis at quadrature point `q`.
#[inline]
fn q2_grad(g: &CellGeometry, q: usize) -> ([f64; 9], [f64; 9]) {
    let r = reference_cell();
    let (sx, sy) = (g.sx(), g.sy());
    let mut dx = [0.0; 9];
    let mut dy = [0.0; 9];
    for k in 0..9 {
        dx[k] = sx * r.q2_dxi[q][k];
        dy[k] = sy * r.q2_deta[q][k];
    }
    (dx, dy)
}

/// Value and gradient of the discrete velocity at quadrature point `q`.
#[inline]
fn velocity_at(sp: &FESpaces, nodes: &[usize; 9], g: &CellGeometry, w: &[f64], q: usize) -> ([f64; 2], [[f64; 2]; 2]) {
    let r = reference_cell();
    let (dx, dy) = q2_grad(g, q);
    let mut val = [0.0; 2];
    let mut grad = [[0.0; 2]; 2];
    for comp in 0..2 {
        let off = comp * sp.n_vnodes;
        for k in 0..9 {
            let wk = w[off + nodes[k]];
            val[comp] += r.q2[q][k] * wk;
            grad[comp][0] += dx[k] * wk;
            grad[comp][1] += dy[k] * wk;
        }
    }
    (val, grad)
}

/// Scatters a scalar Q2 element matrix into both velocity components.
fn scatter_vector_q2(sp: &FESpaces, t: &mut TripletBuilder, nodes: &[usize; 9], ke: &[[f64; 9]; 9]) {
    for comp in 0..2 {
        let off = comp * sp.n_vnodes;
        for l in 0..9 {
            for j in 0..9 {
                t.push(off + nodes[l], off + nodes[j], ke[l][j]);
            }
        }
    }
}

fn q2_mass_element(g: &CellGeometry) -> [[f64; 9]; 9] {
    let r = reference_cell();
    let mut ke = [[0.0; 9]; 9];
    for q in 0..NQ {
        let wq = r.weights[q] * g.det();
        for l in 0..9 {
            for j in 0..9 {
                ke[l][j] += wq * r.q2[q][l] * r.q2[q][j];
            }
        }
    }
    ke
}

fn q2_stiffness_element(g: &CellGeometry) -> [[f64; 9]; 9] {
    let r = reference_cell();
    let mut ke = [[0.0; 9]; 9];
    for q in 0..NQ {
        let wq = r.weights[q] * g.det();
        let (dx, dy) = q2_grad(g, q);
        for l in 0..9 {
            for j in 0..9 {
                ke[l][j] += wq * (dx[l] * dx[j] + dy[l] * dy[j]);
            }
        }
    }
    ke
}

pub(crate) fn assemble_vector_q2_ordered(
    sp: &FESpaces,
    order: &[usize],
    element: impl Fn(&CellGeometry) -> [[f64; 9]; 9],
) -> SparseMatrix {
    let mut t = TripletBuilder::with_capacity(sp.n_u, sp.n_u, order.len() * 162);
    for &cell in order {
        let g = geometry(sp, cell);
        scatter_vector_q2(sp, &mut t, &sp.q2_nodes[cell], &element(&g));
    }
    t.build()
}

/// Velocity mass matrix `M_u` (block diagonal over the two components).
pub fn assemble_mass_u(sp: &FESpaces) -> SparseMatrix {
    assemble_vector_q2_ordered(sp, &natural_order(sp), q2_mass_element)
}

/// Vector stiffness `K_u`, the Gram matrix of gradients (without `nu`).
pub fn assemble_stiffness_u(sp: &FESpaces) -> SparseMatrix {
    assemble_vector_q2_ordered(sp, &natural_order(sp), q2_stiffness_element)
}

fn assemble_q1(sp: &FESpaces, stiffness: bool) -> SparseMatrix {
    let r = reference_cell();
    let mut t = TripletBuilder::with_capacity(sp.n_p, sp.n_p, sp.mesh.cells() * 16);
    for cell in 0..sp.mesh.cells() {
        let g = geometry(sp, cell);
        let nodes = &sp.q1_nodes[cell];
        let mut ke = [[0.0; 4]; 4];
        for q in 0..NQ {
            let wq = r.weights[q] * g.det();
            for l in 0..4 {
                for j in 0..4 {
                    ke[l][j] += wq
                        * if stiffness {
                            g.sx() * g.sx() * r.q1_dxi[q][l] * r.q1_dxi[q][j]
                                + g.sy() * g.sy() * r.q1_deta[q][l] * r.q1_deta[q][j]
                        } else {
                            r.q1[q][l] * r.q1[q][j]
                        };
                }
            }
        }
        for l in 0..4 {
            for j in 0..4 {
                t.push(nodes[l], nodes[j], ke[l][j]);
            }
        }
    }
    t.build()
}

/// Pressure mass matrix `M_p`.
pub fn assemble_mass_p(sp: &FESpaces) -> SparseMatrix {
    assemble_q1(sp, false)
}

/// Pressure stiffness (Laplacian) `K_p`, singular with constants in its kernel.
pub fn assemble_stiffness_p(sp: &FESpaces) -> SparseMatrix {
    assemble_q1(sp, true)
}

/// Negative divergence `B` (`n_p x n_u`) with entries `-(psi_l, div phi_j)`.
pub fn assemble_divergence(sp: &FESpaces) -> SparseMatrix {
    let r = reference_cell();
    let mut t = TripletBuilder::with_capacity(sp.n_p, sp.n_u, sp.mesh.cells() * 72);
    for cell in 0..sp.mesh.cells() {
        let g = geometry(sp, cell);
        let vn = &sp.q2_nodes[cell];
        let pn = &sp.q1_nodes[cell];
        let mut bx = [[0.0; 9]; 4];
        let mut by = [[0.0; 9]; 4];
        for q in 0..NQ {
            let wq = r.weights[q] * g.det();
            let (dx, dy) = q2_grad(&g, q);
            for l in 0..4 {
                for j in 0..9 {
                    bx[l][j] -= wq * r.q1[q][l] * dx[j];
                    by[l][j] -= wq * r.q1[q][l] * dy[j];
                }
            }
        }
        for l in 0..4 {
            for j in 0..9 {
                t.push(pn[l], vn[j], bx[l][j]);
                t.push(pn[l], sp.n_vnodes + vn[j], by[l][j]);
            }
        }
    }
    t.build()
}

/// Vector convection `N_u(w)` with entries `((w . grad) phi_j, phi_l)`.
pub fn assemble_convection(sp: &FESpaces, w: &[f64]) -> Result<SparseMatrix> {
    check_len(w, sp.n_u)?;
    let r = reference_cell();
    let mut t = TripletBuilder::with_capacity(sp.n_u, sp.n_u, sp.mesh.cells() * 162);
    for cell in 0..sp.mesh.cells() {
        let g = geometry(sp, cell);
        let nodes = &sp.q2_nodes[cell];
        let mut ke = [[0.0; 9]; 9];
        for q in 0..NQ {
            let wq = r.weights[q] * g.det();
            let (wv, _) = velocity_at(sp, nodes, &g, w, q);
            let (dx, dy) = q2_grad(&g, q);
            for j in 0..9 {
                let adv = wv[0] * dx[j] + wv[1] * dy[j];
                for l in 0..9 {
                    ke[l][j] += wq * r.q2[q][l] * adv;
                }
            }
        }
        scatter_vector_q2(sp, &mut t, nodes, &ke);
    }
    Ok(t.build())
}

/// Newton term `H_u(w)` with entries `((phi_j . grad) w, phi_l)`; it couples
/// the two velocity components.
pub fn assemble_convection_jacobian(sp: &FESpaces, w: &[f64]) -> Result<SparseMatrix> {
    check_len(w, sp.n_u)?;
    let r = reference_cell();
    let mut t = TripletBuilder::with_capacity(sp.n_u, sp.n_u, sp.mesh.cells() * 324);
    for cell in 0..sp.mesh.cells() {
        let g = geometry(sp, cell);
        let nodes = &sp.q2_nodes[cell];
        // he[d][c]: test component d, trial component c
        let mut he = [[[[0.0; 9]; 9]; 2]; 2];
        for q in 0..NQ {
            let wq = r.weights[q] * g.det();
            let (_, grad) = velocity_at(sp, nodes, &g, w, q);
            for d in 0..2 {
                for c in 0..2 {
                    let coef = wq * grad[d][c];
                    if coef == 0.0 {
                        continue;
                    }
                    for l in 0..9 {
                        for j in 0..9 {
                            he[d][c][l][j] += coef * r.q2[q][l] * r.q2[q][j];
                        }
                    }
                }
            }
        }
        for d in 0..2 {
            for c in 0..2 {
                for l in 0..9 {
                    for j in 0..9 {
                        let v = he[d][c][l][j];
                        if v != 0.0 {
                            t.push(d * sp.n_vnodes + nodes[l], c * sp.n_vnodes + nodes[j], v);
                        }
                    }
                }
            }
        }
    }
    Ok(t.build())
}

/// Load vector `(f, phi_l)` for a vector field `f(x, y)`.
pub fn assemble_load(sp: &FESpaces, f: impl Fn(f64, f64) -> [f64; 2]) -> Vec<f64> {
    let r = reference_cell();
    let mut out = vec![0.0; sp.n_u];
    for cell in 0..sp.mesh.cells() {
        let g = geometry(sp, cell);
        let nodes = &sp.q2_nodes[cell];
        for q in 0..NQ {
            let wq = r.weights[q] * g.det();
            let (x, y) = g.map(r.points[q].0, r.points[q].1);
            let fv = f(x, y);
            for l in 0..9 {
                out[nodes[l]] += wq * fv[0] * r.q2[q][l];
                out[sp.n_vnodes + nodes[l]] += wq * fv[1] * r.q2[q][l];
            }
        }
    }
    out
}

/// Load vector `(f, psi_l)` on the pressure space for a scalar `f(x, y)`.
pub fn assemble_pressure_load(sp: &FESpaces, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let r = reference_cell();
    let mut out = vec![0.0; sp.n_p];
    for cell in 0..sp.mesh.cells() {
        let g = geometry(sp, cell);
        let nodes = &sp.q1_nodes[cell];
        for q in 0..NQ {
            let wq = r.weights[q] * g.det();
            let (x, y) = g.map(r.points[q].0, r.points[q].1);
            let fv = f(x, y);
            for l in 0..4 {
                out[nodes[l]] += wq * fv * r.q1[q][l];
            }
        }
    }
    out
}

/// Right-hand side of the weak pressure Poisson problem
/// `(grad p, grad psi) = (f + nu lap u - (u . grad) u, grad psi)`, with the
/// Laplacian of the discrete velocity taken cellwise.
pub fn assemble_pressure_poisson_rhs(
    sp: &FESpaces,
    u: &[f64],
    nu: f64,
    convection: bool,
    f: impl Fn(f64, f64) -> [f64; 2],
) -> Result<Vec<f64>> {
    check_len(u, sp.n_u)?;
    let r = reference_cell();
    let mut out = vec![0.0; sp.n_p];
    for cell in 0..sp.mesh.cells() {
        let g = geometry(sp, cell);
        let nodes = &sp.q2_nodes[cell];
        let pn = &sp.q1_nodes[cell];
        for q in 0..NQ {
            let wq = r.weights[q] * g.det();
            let (x, y) = g.map(r.points[q].0, r.points[q].1);
            let (val, grad) = velocity_at(sp, nodes, &g, u, q);
            let fv = f(x, y);
            let mut field = [0.0; 2];
            for comp in 0..2 {
                let off = comp * sp.n_vnodes;
                let lap: f64 = (0..9)
                    .map(|k| {
                        (g.sx() * g.sx() * r.q2_dxixi[q][k] + g.sy() * g.sy() * r.q2_detaeta[q][k])
                            * u[off + nodes[k]]
                    })
                    .sum();
                let conv = if convection {
                    val[0] * grad[comp][0] + val[1] * grad[comp][1]
                } else {
                    0.0
                };
                field[comp] = fv[comp] + nu * lap - conv;
            }
            for l in 0..4 {
                let gx = g.sx() * r.q1_dxi[q][l];
                let gy = g.sy() * r.q1_deta[q][l];
                out[pn[l]] += wq * (field[0] * gx + field[1] * gy);
            }
        }
    }
    Ok(out)
}
