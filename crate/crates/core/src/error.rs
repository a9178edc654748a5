use thiserror::Error;

use crate::tree::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("p-value at index {index} is {value}; expected a value strictly inside (0, 1)")]
    PValueOutOfRange { index: usize, value: f64 },

    #[error("statistic at index {index} is not finite ({value})")]
    NonFiniteStatistic { index: usize, value: f64 },

    #[error("dimension mismatch: {what} has {found} entries, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid tree ({} violation(s)): {}", .0.len(), first_violation(.0))]
    InvalidTree(Vec<Violation>),

    #[error("singular design matrix after regenerating covariates")]
    SingularDesign,

    #[error("{0}")]
    Domain(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by caller input rather than a broken invariant.
    pub fn is_input_domain(&self) -> bool {
        !matches!(self, Error::Invariant(_))
    }
}

fn first_violation(v: &[Violation]) -> String {
    v.first().map(|x| x.to_string()).unwrap_or_default()
}
