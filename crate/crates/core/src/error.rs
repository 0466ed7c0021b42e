use thiserror::Error;

/// Errors produced by the model, the integrator and the estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A configuration value violates its documented range.
    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },

    /// The integrator produced a NaN or infinity.
    #[error("non-finite value in `{variable}` at step {step}")]
    NonFinite { step: u64, variable: String },

    /// The run would allocate more than the configured memory cap.
    #[error("trajectory needs {required} bytes, above the cap of {cap} bytes")]
    MemoryCap { required: u64, cap: u64 },

    /// Input data make the requested estimate undefined (e.g. a constant marginal).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Not enough samples, cells or replicates for the requested estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The quantity exists but is numerically meaningless (e.g. dividing by ~0 bits).
    #[error("ill-conditioned: {0}")]
    IllConditioned(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by the user's configuration rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Validation { .. } | Error::MemoryCap { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
