//! Crate-wide error type.

use crate::lie::Dim;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("pose dimension mismatch: {0} vs {1}")]
    DimensionMismatch(Dim, Dim),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("edge {edge}: information matrix is not positive definite")]
    NotPositiveDefinite { edge: usize },

    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("reduced Laplacian factorization failed: graph disconnected or numerically singular")]
    ReducedFactorization,

    #[error("expected {expected} near-zero eigenvalues, found {found}")]
    GaugeCount { expected: usize, found: usize },

    #[error("spectrum has no retained eigenvalues")]
    EmptySpectrum,

    #[error("logarithm ill-conditioned: rotation angle within 1e-6 of pi")]
    LogNearPi,

    #[error("problem size {size} exceeds dense eigensolver limit {limit}")]
    DenseLimit { size: usize, limit: usize },

    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("{0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Process exit code for the CLI: 2 for bad input, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::InvalidArgument(_) | Error::Io(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
