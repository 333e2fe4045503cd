use thiserror::Error;

/// Errors raised by the mappings, losses and the multilabel harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Input vector has no entries.
    #[error("score vector must be non-empty")]
    Empty,

    /// Input vector contains NaN or an infinity.
    #[error("score vector contains a non-finite value at index {0}")]
    NonFinite(usize),

    /// Regularization coefficient outside `lambda < 1`.
    #[error("lambda must be finite and < 1, got {0}")]
    InvalidLambda(f64),

    #[error("temperature must be finite and > 0, got {0}")]
    InvalidTemperature(f64),

    #[error("anchor magnitude q must be finite and >= 0, got {0}")]
    InvalidQ(f64),

    #[error("finite-difference step must be finite and > 0, got {0}")]
    InvalidStep(f64),

    /// The input lies outside the mapping's domain; the message names the
    /// violated precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// Operation has no analytic Jacobian in this crate.
    #[error("no analytic Jacobian for {0}")]
    NotDifferentiable(&'static str),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Training produced a non-finite loss or parameter.
    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by an input falling outside a mapping's domain
    /// or violating a parameter constraint (as opposed to I/O or config).
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::Empty
                | Error::NonFinite(_)
                | Error::InvalidLambda(_)
                | Error::InvalidTemperature(_)
                | Error::InvalidQ(_)
                | Error::InvalidStep(_)
                | Error::Domain(_)
                | Error::NotDifferentiable(_)
                | Error::LengthMismatch(..)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
