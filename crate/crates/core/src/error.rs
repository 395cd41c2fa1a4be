use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: achieved error {achieved:e} > tolerance {tolerance:e}")]
    Quadrature { achieved: f64, tolerance: f64 },

    #[error("model violation: {0}")]
    ModelViolation(String),

    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("positivity failure in cell {cell} at t = {time}: {what}")]
    Positivity { cell: usize, time: f64, what: String },

    #[error("non-finite value detected at t = {time}")]
    NonFinite { time: f64 },

    #[error("time step collapsed: dt = {0:e}")]
    TimeStep(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} is not finite ({x})")))
    }
}
