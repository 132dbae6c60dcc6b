use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("environment value {value} lies outside the ellipticity range [{lo}, {hi}]")]
    Ellipticity { value: f64, lo: f64, hi: f64 },

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("eigenpair {index} did not converge (residual {residual:.3e})")]
    EigenConvergence { index: usize, residual: f64 },

    #[error("eigenbasis captures only a fraction {captured:.12} of the squared norm")]
    InsufficientBasis { captured: f64 },

    #[error("ill-conditioned homogenization fit (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("unsupported function: {0}")]
    Unsupported(String),

    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("malformed input: {0}")]
    Parse(String),

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
}
