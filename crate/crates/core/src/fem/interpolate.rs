//! Nodal interpolation and L2-type projections onto the discrete spaces.

use super::assembly::{assemble_divergence, assemble_load, assemble_mass_p, assemble_mass_u, assemble_pressure_load};
use super::dirichlet::boundary_values;
use super::mesh::FESpaces;
use crate::error::Result;
use crate::linalg::lu_factor;
use crate::sparse::TripletBuilder;

/// Nodal interpolant of a vector field.
pub fn interpolate_velocity(sp: &FESpaces, f: impl Fn(f64, f64) -> [f64; 2]) -> Vec<f64> {
    let mut out = vec![0.0; sp.n_u];
    for node in 0..sp.n_vnodes {
        let (x, y) = sp.velocity_node_coords(node);
        let v = f(x, y);
        out[node] = v[0];
        out[sp.n_vnodes + node] = v[1];
    }
    out
}

/// Nodal interpolant of a scalar field on the pressure space.
pub fn interpolate_pressure(sp: &FESpaces, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    (0..sp.n_p)
        .map(|node| {
            let (x, y) = sp.pressure_node_coords(node);
            f(x, y)
        })
        .collect()
}

/// L2 projection of a vector field onto the velocity space (no boundary
/// constraints).
pub fn project_velocity(sp: &FESpaces, f: impl Fn(f64, f64) -> [f64; 2]) -> Result<Vec<f64>> {
    let lu = lu_factor(&assemble_mass_u(sp))?;
    Ok(lu.solve(&assemble_load(sp, f)))
}

/// L2 projection of a scalar field onto the pressure space.
pub fn project_pressure(sp: &FESpaces, f: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
    let lu = lu_factor(&assemble_mass_p(sp))?;
    Ok(lu.solve(&assemble_pressure_load(sp, f)))
}

/// L2 projection onto the discretely divergence-free velocities that take the
/// nodal boundary values of `f`.
///
/// Solves the saddle-point problem `M v + B^T q = (f, phi)`, `B v = 0` on the
/// free dofs, with the first pressure dof removed to fix the constant mode.
/// Requires the boundary data to carry zero net flux.
pub fn project_solenoidal(sp: &FESpaces, f: impl Fn(f64, f64) -> [f64; 2]) -> Result<Vec<f64>> {
    let mu = assemble_mass_u(sp);
    let b = assemble_divergence(sp);
    let (bdofs, bvals) = boundary_values(sp, &f);
    let load = assemble_load(sp, &f);
    let free = sp.free_velocity_dofs();
    let mut g = vec![0.0; sp.n_u];
    for (&d, &v) in bdofs.iter().zip(&bvals) {
        g[d] = v;
    }
    let mg = mu.apply(&g);
    let bg = b.apply(&g);

    let nf = free.len();
    let np = sp.n_p - 1;
    let mut pos = vec![usize::MAX; sp.n_u];
    for (k, &d) in free.iter().enumerate() {
        pos[d] = k;
    }
    let mut t = TripletBuilder::with_capacity(nf + np, nf + np, mu.nnz() + 2 * b.nnz());
    for (k, &d) in free.iter().enumerate() {
        let (cols, vals) = mu.row(d);
        for (&j, &v) in cols.iter().zip(vals) {
            if pos[j] != usize::MAX {
                t.push(k, pos[j], v);
            }
        }
    }
    for l in 1..sp.n_p {
        let (cols, vals) = b.row(l);
        for (&j, &v) in cols.iter().zip(vals) {
            if pos[j] != usize::MAX {
                t.push(nf + l - 1, pos[j], v);
                t.push(pos[j], nf + l - 1, v);
            }
        }
    }
    let mut rhs = vec![0.0; nf + np];
    for (k, &d) in free.iter().enumerate() {
        rhs[k] = load[d] - mg[d];
    }
    for l in 1..sp.n_p {
        rhs[nf + l - 1] = -bg[l];
    }
    let x = lu_factor(&t.build())?.solve(&rhs);
    for (k, &d) in free.iter().enumerate() {
        g[d] = x[k];
    }
    Ok(g)
}
