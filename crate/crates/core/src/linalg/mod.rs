//! Direct and approximate inverses used inside the preconditioner.

mod chebyshev;
mod ilu;
mod kron;
mod lu;
mod multigrid;

pub use chebyshev::ChebyshevMass;
pub use ilu::{ilu0, Ilu0};
pub use kron::{kron_identity_apply, KronOperator};
pub use lu::{lu_factor, rcm_ordering, LuFactors};
pub use multigrid::{pin_matrix, q1_prolongation, PressurePoisson};
