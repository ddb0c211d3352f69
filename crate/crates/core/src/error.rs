use std::io;

use thiserror::Error;

/// Errors produced by the approximation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point coordinate {value} lies outside [-1, 1]")]
    Domain { value: f64 },

    #[error("size cap exceeded: {what} would need {required}, cap is {cap}")]
    CapExceeded {
        what: &'static str,
        required: u128,
        cap: u128,
    },

    #[error("search budget exceeded after visiting {visited} candidates")]
    SearchBudgetExceeded { visited: u64 },

    #[error("solver diverged (non-finite iterate) at iteration {iteration}")]
    SolverDivergence { iteration: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Whether this error stems from arithmetic rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SolverDivergence { .. } | Error::Numerical(_) | Error::SearchBudgetExceeded { .. }
        )
    }
}
