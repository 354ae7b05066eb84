use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("solver failed after {iterations} iterations (relative residual {residual:.3e})")]
    Solver {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("exponent {max_exponent:.1} exceeds the overflow guard {limit}; lower t by at least {suggested_shift:.3}")]
    Overflow {
        max_exponent: f64,
        limit: f64,
        suggested_shift: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}
