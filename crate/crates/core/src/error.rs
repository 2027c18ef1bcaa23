use thiserror::Error;

/// Errors raised by model construction, analytics and simulation.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A transition matrix row failed validation.
    #[error("transition matrix row {row}: {reason}")]
    InvalidRow { row: usize, reason: String },

    /// A configuration or model field failed validation. `key` names the field.
    #[error("{key}: {reason}")]
    InvalidField { key: String, reason: String },

    /// The chain is reducible or periodic where an ergodic chain is required.
    #[error("unsupported chain: {0}")]
    UnsupportedChain(String),

    /// The spectral route is unavailable; use the direct covariance route instead.
    #[error("spectral decomposition unsupported: {0}; use the direct covariance path")]
    SpectralUnsupported(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// A theorem-level precondition does not hold for the supplied model.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Conditioning on an event of probability zero.
    #[error("degenerate conditioning: {0}")]
    DegenerateConditioning(String),

    #[error("state space too large: {paths} hidden paths exceed the limit of {limit}")]
    StateSpaceTooLarge { paths: f64, limit: f64 },

    /// The truncated series could not reach the requested accuracy.
    #[error("accuracy failure: tail bound {bound:e} exceeds tolerance {eps:e}; fall back to Monte Carlo")]
    Accuracy { bound: f64, eps: f64 },
}

impl Error {
    pub(crate) fn field(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidField {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
