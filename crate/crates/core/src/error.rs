use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension {0} is not supported (simple random walk must be transient, d >= 3)")]
    Dimension(usize),

    #[error("coverage failure: {0}")]
    Coverage(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("linear system is singular or ill-conditioned: {0}")]
    Singular(String),

    #[error("iterative solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("path lifting failed at block {block}: {clause}")]
    LiftFailure { block: String, clause: String },

    #[error("{what} of size {size} exceeds the configured cap {cap}")]
    TooLarge { what: &'static str, size: usize, cap: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(name, format!("{p} is not in [0, 1]")))
    }
}
