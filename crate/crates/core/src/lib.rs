//! Implicit Runge-Kutta time stepping for the incompressible Navier-Stokes
//! equations on structured Taylor-Hood Q2-Q1 meshes, with Newton's method on
//! the coupled stage system and flexible GMRES preconditioned by an augmented
//! Lagrangian block upper-triangular preconditioner.

pub mod al_precond;
pub mod error;
pub mod fem;
pub mod fgmres;
pub mod linalg;
pub mod sparse;
pub mod stage_system;
pub mod tableau;

pub use error::{Error, Result};
pub use sparse::{SparseMatrix, TripletBuilder};
pub use tableau::{check_order_conditions, make_tableau, ButcherTableau, Family};
