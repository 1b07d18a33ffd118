//! Structured meshes, Taylor-Hood Q2-Q1 spaces and operator assembly.

mod assembly;
mod dirichlet;
mod interpolate;
mod lps;
mod mesh;
mod reference;

pub use assembly::{
    assemble_convection, assemble_convection_jacobian, assemble_divergence, assemble_load, assemble_mass_p,
    assemble_mass_u, assemble_pressure_load, assemble_pressure_poisson_rhs, assemble_stiffness_p, assemble_stiffness_u,
};
pub use dirichlet::{apply_dirichlet, boundary_values, DirichletMode};
pub use interpolate::{interpolate_pressure, interpolate_velocity, project_pressure, project_solenoidal, project_velocity};
pub use lps::{assemble_lps, lps_delta};
pub use mesh::{build_mesh, BoundarySets, FESpaces, Rectangle, StructuredMesh};
