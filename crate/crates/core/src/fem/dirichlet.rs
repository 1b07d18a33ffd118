use super::mesh::FESpaces;
use crate::error::{Error, Result};
use crate::sparse::{SparseMatrix, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirichletMode {
    /// Constrained rows become identity rows; columns are left alone.
    RowReplace,
    /// Rows and columns are cleared and the known values are moved to the
    /// right-hand side, preserving symmetry.
    SymmetricEliminate,
}

/// Imposes `x[dofs[k]] = values[k]` on the system `a x = rhs`.
pub fn apply_dirichlet(
    a: &SparseMatrix,
    rhs: &[f64],
    dofs: &[usize],
    values: &[f64],
    mode: DirichletMode,
) -> Result<(SparseMatrix, Vec<f64>)> {
    if dofs.len() != values.len() {
        return Err(Error::MissingBoundaryValue {
            dofs: dofs.len(),
            values: values.len(),
        });
    }
    let n = a.nrows();
    if rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rhs.len(),
        });
    }
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    for (&d, &v) in dofs.iter().zip(values) {
        fixed[d] = Some(v);
    }
    let mut b = rhs.to_vec();
    let mut t = TripletBuilder::with_capacity(n, a.ncols(), a.nnz());
    for i in 0..n {
        if let Some(v) = fixed[i] {
            t.push(i, i, 1.0);
            b[i] = v;
            continue;
        }
        let (cols, vals) = a.row(i);
        for (&j, &aij) in cols.iter().zip(vals) {
            match (mode, fixed.get(j).copied().flatten()) {
                (DirichletMode::SymmetricEliminate, Some(g)) => b[i] -= aij * g,
                _ => t.push(i, j, aij),
            }
        }
    }
    Ok((t.build(), b))
}

/// Dirichlet dofs and their values for a boundary field `g(x, y)`, in the
/// order of [`FESpaces::dirichlet_dofs`].
pub fn boundary_values(sp: &FESpaces, g: impl Fn(f64, f64) -> [f64; 2]) -> (Vec<usize>, Vec<f64>) {
    let dofs = sp.dirichlet_dofs();
    let values = dofs
        .iter()
        .map(|&d| {
            let (node, comp) = (d % sp.n_vnodes, d / sp.n_vnodes);
            let (x, y) = sp.velocity_node_coords(node);
            g(x, y)[comp]
        })
        .collect();
    (dofs, values)
}
