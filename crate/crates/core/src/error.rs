use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("assumption {which} violated: {detail}")]
    Assumption { which: &'static str, detail: String },

    #[error("correlation matrix is not positive semi-definite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("fixed point did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("numerically unstable regime: {0}")]
    Regime(String),
}

impl Error {
    /// True for failures caused by the numerical regime rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NoConvergence { .. } | Error::Regime(_))
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
