use thiserror::Error;

/// Error type shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum MegError {
    /// A model invariant does not hold (probability rows not normalized,
    /// negative entries, inconsistent bounds). The message names the first
    /// violated invariant and its index location.
    #[error("validation failed: {0}")]
    Validation(String),

    /// Inputs that should describe the same decision problem disagree on
    /// horizon, state count, or action count.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A requested expected utility cannot be achieved by any policy.
    #[error("expected utility {target} outside attainable range [{min}, {max}]")]
    Unattainable { target: f64, min: f64, max: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, MegError>;
