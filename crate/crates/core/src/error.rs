use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sdp::SdpStatus;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("invalid problem data: {0}")]
    InvalidProblem(String),

    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("relaxation order {given} is below the minimal admissible order {minimal}")]
    OrderTooSmall { given: u32, minimal: u32 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("solver failed on {problem}: status {status:?}")]
    Solver { problem: String, status: SdpStatus },

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse grouping of errors, used for per-method reports and exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorCategory {
    Config,
    Solver,
    Sampling,
    Io,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::DimensionMismatch { .. }
            | Error::OutOfRange(_)
            | Error::Validation(_)
            | Error::OrderTooSmall { .. }
            | Error::Domain(_)
            | Error::Config { .. }
            | Error::Json(_) => ErrorCategory::Config,
            Error::InvalidProblem(_) | Error::Infeasible(_) | Error::Solver { .. } => ErrorCategory::Solver,
            Error::Sampling(_) => ErrorCategory::Sampling,
            Error::Io(_) => ErrorCategory::Io,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
