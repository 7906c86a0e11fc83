//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by network construction, simulation and training.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or argument violates a documented precondition.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Two values that must describe the same structure do not.
    #[error("structural mismatch: {0}")]
    Mismatch(String),

    /// A weight vector does not fit the declared architecture.
    #[error("weight dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Supervised training hit its iteration cap before reaching tolerance.
    /// Carries the outputs actually achieved on the two training states.
    #[error(
        "training did not converge after {iterations} iterations: \
         outputs {achieved:?} vs targets {targets:?}"
    )]
    NoConvergence {
        iterations: usize,
        achieved: Vec<f64>,
        targets: Vec<f64>,
    },

    /// A weights file or text description could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
