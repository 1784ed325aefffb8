use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NonHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("measurements are not projective (max idempotency defect {0:.3e})")]
    NonProjective(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("size cap exceeded: {0}")]
    Overflow(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("invalid input data: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;
