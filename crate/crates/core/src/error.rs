use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: {count} exceeds the budget of {budget}")]
    BudgetExceeded {
        what: &'static str,
        count: u128,
        budget: u128,
    },

    #[error("coordinate {coord}, field `{field}`: {reason}")]
    InvalidSpace {
        coord: usize,
        field: &'static str,
        reason: String,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("operands live on different product spaces")]
    SpaceMismatch,

    #[error("conditioning event has zero mass")]
    ZeroMass,

    #[error("KL divergence is infinite: {0}")]
    InfiniteDivergence(&'static str),

    #[error("reference measures must be uniform for this operation (coordinate {coord})")]
    NonUniformReference { coord: usize },

    #[error("operation requires two-point alphabets, coordinate {coord} has {size} symbols")]
    NotBinary { coord: usize, size: usize },

    #[error("entropic transport did not converge after {iterations} iterations (marginal violation {violation:e})")]
    SinkhornNotConverged { iterations: usize, violation: f64 },

    #[error("tanh fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    TanhNotConverged {
        iterations: usize,
        residual: f64,
        trajectory: Vec<Vec<f64>>,
    },

    #[error("transport solver failed: {0}")]
    Solver(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn space(coord: usize, field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidSpace {
            coord,
            field,
            reason: reason.into(),
        }
    }

    /// True for errors caused by a configured size limit.
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::BudgetExceeded { .. })
    }
}
