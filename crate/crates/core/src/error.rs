use thiserror::Error;

/// Errors surfaced by every fallible operation in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TsmError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("structure matrix {index} is {rows}x{cols}, expected {expected}x{expected}")]
    MatrixShape {
        index: usize,
        rows: usize,
        cols: usize,
        expected: usize,
    },
    #[error("lambda must be nonzero")]
    ZeroLambda,
    #[error("degenerate symplectic form (smallest singular value {0:.3e})")]
    DegenerateForm(f64),
    #[error("reduction residual {achieved:.3e} exceeds tolerance {tolerance:.1e}")]
    Numeric { achieved: f64, tolerance: f64 },
    #[error("polynomial is not bi-homogeneous")]
    NotHomogeneous,
    #[error("polynomial is not harmonic (max |laplacian coefficient| = {0:.3e})")]
    NotHarmonic(f64),
    #[error("invalid operator stack: {0}")]
    InvalidStack(String),
    #[error("quadrature node {node} lies within {distance:.1e} of a declared singularity")]
    Singularity { node: usize, distance: f64 },
    #[error("unsupported integrand: {0}")]
    Unsupported(String),
    #[error("truncation failure: {0}")]
    Truncation(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("json error: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, TsmError>;

impl From<std::io::Error> for TsmError {
    fn from(err: std::io::Error) -> Self {
        TsmError::Io(err.to_string())
    }
}

impl From<serde_json::Error> for TsmError {
    fn from(err: serde_json::Error) -> Self {
        TsmError::Json(err.to_string())
    }
}
