use thiserror::Error;

/// Errors raised by the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported stage count {stages} for {family}")]
    UnsupportedStageCount { family: &'static str, stages: usize },
    #[error("tableau coefficient matrix is singular (min singular value {0:e})")]
    SingularTableau(f64),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("LPS patches need an even number of cells per direction (nx={nx}, ny={ny})")]
    OddCellCount { nx: usize, ny: usize },
    #[error("missing boundary value: {dofs} Dirichlet dofs but {values} values")]
    MissingBoundaryValue { dofs: usize, values: usize },
    #[error("zero pivot in column {0}")]
    SingularPivot(usize),
    #[error("zero diagonal in row {0} during ILU(0), even after shifting")]
    DiagonalBreakdown(usize),
    #[error("initial velocity is not discretely solenoidal (|Bu| = {0:e})")]
    NotSolenoidal(f64),
    #[error("Newton failed to converge at step {step} after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged {
        step: usize,
        iterations: usize,
        residual: f64,
    },
    #[error("W = M_p requested on {0} pressure dofs; only allowed up to {1}")]
    FullMpTooLarge(usize, usize),
    #[error("inner Schur operator is numerically singular (rcond {0:e})")]
    SingularInner(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
