use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration field failed validation.
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// AMP produced a non-finite value.
    #[error("detector diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("hypothesis enumeration needs {needed} hypotheses, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("divergence budget exceeded: {diverged} of {attempts} trial attempts diverged")]
    DivergenceBudget { diverged: u64, attempts: u64 },

    #[error("oracle covariance is not positive definite")]
    NotPositiveDefinite,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field,
            reason: reason.into(),
        }
    }

    /// True for numerical failures (divergence), as opposed to usage errors.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. } | Error::DivergenceBudget { .. } | Error::NotPositiveDefinite
        )
    }
}
