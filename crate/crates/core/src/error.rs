use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("{name} out of range: {detail}")]
    OutOfRange { name: &'static str, detail: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("enumeration budget exceeded: {required} evaluations needed, budget is {budget}; use {fallback} instead")]
    BudgetExceeded {
        required: u128,
        budget: u128,
        fallback: &'static str,
    },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Raised when a constructed object fails its own invariant check.
    /// Always an implementation bug, never bad input.
    #[error("internal invariant violated at index {index}: {detail}")]
    InternalInvariant { index: usize, detail: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn out_of_range(name: &'static str, detail: impl Into<String>) -> Self {
        Error::OutOfRange {
            name,
            detail: detail.into(),
        }
    }

    /// Budget and convergence failures map to a distinct CLI exit status.
    pub fn is_resource_failure(&self) -> bool {
        matches!(
            self,
            Error::BudgetExceeded { .. } | Error::NonConvergence { .. }
        )
    }
}
