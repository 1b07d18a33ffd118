use crate::error::{Error, Result};

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rectangle {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rectangle {
    pub const UNIT_SQUARE: Rectangle = Rectangle {
        x0: 0.0,
        x1: 1.0,
        y0: 0.0,
        y1: 1.0,
    };

    /// `(-1, 1)^2`
    pub const REFERENCE_SQUARE: Rectangle = Rectangle {
        x0: -1.0,
        x1: 1.0,
        y0: -1.0,
        y1: 1.0,
    };

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// Uniform quadrilateral mesh with `nx * ny` cells. Pressure (Q1) nodes sit on
/// cell vertices; velocity (Q2) nodes on the twice-refined lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredMesh {
    pub domain: Rectangle,
    pub level: u32,
    pub nx: usize,
    pub ny: usize,
    /// Cell width and height (the pressure mesh size).
    pub hx: f64,
    pub hy: f64,
}

impl StructuredMesh {
    pub fn new(domain: Rectangle, nx: usize, ny: usize) -> Self {
        let level = (nx.max(1) as f64).log2().round() as u32;
        Self {
            domain,
            level,
            nx,
            ny,
            hx: domain.width() / nx as f64,
            hy: domain.height() / ny as f64,
        }
    }

    pub fn h_pressure(&self) -> f64 {
        self.hx
    }

    pub fn h_velocity(&self) -> f64 {
        self.hx / 2.0
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    /// Lower-left corner of cell `(ex, ey)`.
    pub fn cell_origin(&self, ex: usize, ey: usize) -> (f64, f64) {
        (
            self.domain.x0 + ex as f64 * self.hx,
            self.domain.y0 + ey as f64 * self.hy,
        )
    }
}

/// Boundary velocity nodes grouped by side. Corners belong to the left and
/// right sides so the top and bottom sets are open intervals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundarySets {
    pub bottom: Vec<usize>,
    pub right: Vec<usize>,
    pub top: Vec<usize>,
    pub left: Vec<usize>,
}

impl BoundarySets {
    pub fn all_nodes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .bottom
            .iter()
            .chain(&self.right)
            .chain(&self.top)
            .chain(&self.left)
            .copied()
            .collect();
        v.sort_unstable();
        v
    }
}

/// Taylor-Hood Q2-Q1 degrees of freedom on a [`StructuredMesh`].
///
/// Velocity dofs are ordered lexicographically by lattice coordinate with all
/// x-components before all y-components; pressure dofs are lexicographic on
/// the vertex grid.
#[derive(Debug, Clone)]
pub struct FESpaces {
    pub mesh: StructuredMesh,
    /// Velocity lattice size per direction, `2nx+1` and `2ny+1`.
    pub vnx: usize,
    pub vny: usize,
    pub n_vnodes: usize,
    pub n_u: usize,
    pub n_p: usize,
    /// Global Q2 node of local node `a + 3b` in each cell.
    pub q2_nodes: Vec<[usize; 9]>,
    /// Global Q1 node of local node `a + 2b` in each cell.
    pub q1_nodes: Vec<[usize; 4]>,
    pub boundary: BoundarySets,
}

/// Builds a mesh of `2^level` cells per direction on `domain` plus the
/// Taylor-Hood spaces on it.
pub fn build_mesh(domain: Rectangle, level: u32) -> Result<FESpaces> {
    if level < 1 {
        return Err(Error::Config("refinement level must be >= 1".into()));
    }
    let n = 1usize << level;
    Ok(FESpaces::new(StructuredMesh::new(domain, n, n)))
}

impl FESpaces {
    pub fn new(mesh: StructuredMesh) -> Self {
        let (nx, ny) = (mesh.nx, mesh.ny);
        let vnx = 2 * nx + 1;
        let vny = 2 * ny + 1;
        let n_vnodes = vnx * vny;
        let mut q2_nodes = Vec::with_capacity(nx * ny);
        let mut q1_nodes = Vec::with_capacity(nx * ny);
        for ey in 0..ny {
            for ex in 0..nx {
                let mut q2 = [0usize; 9];
                for b in 0..3 {
                    for a in 0..3 {
                        q2[a + 3 * b] = (2 * ex + a) + (2 * ey + b) * vnx;
                    }
                }
                let mut q1 = [0usize; 4];
                for b in 0..2 {
                    for a in 0..2 {
                        q1[a + 2 * b] = (ex + a) + (ey + b) * (nx + 1);
                    }
                }
                q2_nodes.push(q2);
                q1_nodes.push(q1);
            }
        }
        let mut boundary = BoundarySets::default();
        for j in 0..vny {
            for i in 0..vnx {
                let node = i + j * vnx;
                if i == 0 {
                    boundary.left.push(node);
                } else if i == vnx - 1 {
                    boundary.right.push(node);
                } else if j == 0 {
                    boundary.bottom.push(node);
                } else if j == vny - 1 {
                    boundary.top.push(node);
                }
            }
        }
        Self {
            mesh,
            vnx,
            vny,
            n_vnodes,
            n_u: 2 * n_vnodes,
            n_p: (nx + 1) * (ny + 1),
            q2_nodes,
            q1_nodes,
            boundary,
        }
    }

    pub fn cell_index(&self, ex: usize, ey: usize) -> usize {
        ex + ey * self.mesh.nx
    }

    pub fn velocity_node_coords(&self, node: usize) -> (f64, f64) {
        let (i, j) = (node % self.vnx, node / self.vnx);
        let d = &self.mesh.domain;
        (
            d.x0 + i as f64 * self.mesh.hx / 2.0,
            d.y0 + j as f64 * self.mesh.hy / 2.0,
        )
    }

    pub fn pressure_node_coords(&self, node: usize) -> (f64, f64) {
        let n1 = self.mesh.nx + 1;
        let (i, j) = (node % n1, node / n1);
        let d = &self.mesh.domain;
        (d.x0 + i as f64 * self.mesh.hx, d.y0 + j as f64 * self.mesh.hy)
    }

    /// Dof index of component `comp` (0 = x, 1 = y) at velocity node `node`.
    #[inline]
    pub fn velocity_dof(&self, node: usize, comp: usize) -> usize {
        comp * self.n_vnodes + node
    }

    /// Sorted Dirichlet velocity dofs (both components of every boundary node).
    pub fn dirichlet_dofs(&self) -> Vec<usize> {
        let nodes = self.boundary.all_nodes();
        let mut dofs: Vec<usize> = nodes
            .iter()
            .copied()
            .chain(nodes.iter().map(|&n| n + self.n_vnodes))
            .collect();
        dofs.sort_unstable();
        dofs
    }

    /// Sorted velocity dofs not in the Dirichlet set.
    pub fn free_velocity_dofs(&self) -> Vec<usize> {
        let mut is_bc = vec![false; self.n_u];
        for d in self.dirichlet_dofs() {
            is_bc[d] = true;
        }
        (0..self.n_u).filter(|&d| !is_bc[d]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_unit_square_level_two() {
        let sp = build_mesh(Rectangle::UNIT_SQUARE, 2).unwrap();
        assert_eq!(sp.n_p, 25);
        assert_eq!(sp.n_u, 162);
        assert_eq!(sp.mesh.h_pressure(), 0.25);
        assert_eq!(sp.mesh.h_velocity(), 0.125);
    }

    #[test]
    fn counts_reference_square_level_three() {
        let sp = build_mesh(Rectangle::REFERENCE_SQUARE, 3).unwrap();
        assert_eq!(sp.n_p, 81);
        assert_eq!(sp.n_u, 2 * 17 * 17);
    }

    #[test]
    fn constrained_counts_match_stage_dimension() {
        // 2 stages at level 3: 2 * (450 + 81) = 1062
        let sp = build_mesh(Rectangle::UNIT_SQUARE, 3).unwrap();
        assert_eq!(sp.n_u, 578);
        let free = sp.free_velocity_dofs().len();
        assert_eq!(free, 450);
        assert_eq!(2 * (free + sp.n_p), 1062);
    }

    #[test]
    fn every_boundary_node_in_exactly_one_side() {
        let sp = build_mesh(Rectangle::UNIT_SQUARE, 2).unwrap();
        let all = sp.boundary.all_nodes();
        let mut dedup = all.clone();
        dedup.dedup();
        assert_eq!(all, dedup);
        assert_eq!(all.len(), 4 * (sp.vnx - 1));
        // top set excludes the corners
        assert_eq!(sp.boundary.top.len(), sp.vnx - 2);
    }

    #[test]
    fn level_zero_is_rejected() {
        assert!(build_mesh(Rectangle::UNIT_SQUARE, 0).is_err());
    }
}
