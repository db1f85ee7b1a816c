use thiserror::Error;

use crate::engine::McEstimate;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),

    /// The truncated Fourier integral did not settle. `residual` is the last
    /// error estimate or tail contribution the quadrature could achieve.
    #[error("quadrature did not converge ({context}); achieved residual {residual:.3e}")]
    Quadrature { context: &'static str, residual: f64 },

    /// A run was cut short by the path cap or the wall-clock budget.
    #[error("resource budget exceeded after {} of {requested} paths", partial.n_samples)]
    BudgetExceeded {
        partial: Box<McEstimate>,
        requested: u64,
    },

    #[error("weak error is exactly zero at N = {n_steps}; log-log fit undefined, raise the sample count M")]
    ZeroError { n_steps: usize },
}
