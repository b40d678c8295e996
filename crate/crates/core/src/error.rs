use thiserror::Error;

/// Errors raised by the estimators, the inference routines and the harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MccError {
    #[error("table total is zero")]
    ZeroTotal,

    #[error("class count {r} is invalid (need at least 2)")]
    TooFewClasses { r: usize },

    #[error("class count {r} exceeds the supported maximum of {max}")]
    TooManyClasses { r: usize, max: usize },

    #[error("expected {expected} cells, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("invalid probabilities: {reason}")]
    InvalidProbabilities { reason: String },

    #[error("degenerate marginal: {reason}")]
    DegenerateMarginal { reason: String },

    #[error("alpha must lie in (0, 1), got {alpha}")]
    InvalidAlpha { alpha: f64 },

    #[error("sample size must be at least 1")]
    InvalidSampleSize,

    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },
}

impl MccError {
    pub(crate) fn degenerate(reason: impl Into<String>) -> Self {
        MccError::DegenerateMarginal {
            reason: reason.into(),
        }
    }

    /// True when the error stems from a table whose marginals make an
    /// estimator or its variance undefined.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, MccError::DegenerateMarginal { .. })
    }
}

pub type Result<T> = std::result::Result<T, MccError>;
