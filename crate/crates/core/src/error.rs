use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("empty measure")]
    EmptyMeasure,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("divergent: {0}")]
    Divergent(String),
    #[error("dyadic tree too large: {0} cubes")]
    TreeTooLarge(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Checks the quasilinear range `1 < p < n`.
pub(crate) fn check_p(p: f64, n: usize) -> Result<()> {
    if p > 1.0 && p < n as f64 {
        Ok(())
    } else {
        Err(invalid("p", format!("need 1 < p < n = {n}, got {p}")))
    }
}
