use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown kind `{0}`")]
    UnknownKind(String),
    #[error("axis {axis}: step {step} does not divide length {len}")]
    Divisibility { axis: usize, step: usize, len: usize },
    #[error("not a frame: lower frame bound {lower:e} <= tolerance {tol:e}")]
    NotAFrame { lower: f64, tol: f64 },
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("missing dual window")]
    MissingDual,
    #[error("shift ({0}) is not a lattice point")]
    OffLattice(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
}

pub type Result<T> = std::result::Result<T, Error>;
