use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("scene point {pixel} coincides with an antenna (receiver {receiver})")]
    SingularAmplitude { pixel: usize, receiver: usize },

    #[error("receiver {receiver} has an all-zero signal, SNR is undefined")]
    ZeroSignal { receiver: usize },

    #[error("leading eigenvalue of the backprojected estimate is not positive ({eigenvalue:e})")]
    NonPositiveEigenvalue { eigenvalue: f64 },

    #[error("objective diverged at iteration {iteration}: {objective:e} exceeds {limit:e}")]
    Diverged {
        iteration: usize,
        objective: f64,
        limit: f64,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("dense path budget exceeded: {required} entries requested, budget {budget}")]
    BudgetExceeded { required: usize, budget: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown phantom `{0}`")]
    UnknownPhantom(String),

    #[error("image error: {0}")]
    Image(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True when the failure stems from user-supplied configuration rather than numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::Config(_)
                | Error::UnknownPhantom(_)
                | Error::Image(_)
                | Error::DimensionMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
