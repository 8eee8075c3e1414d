//! Error type shared by every module.

use thiserror::Error;

use crate::harness::ExperimentResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),

    #[error("kernel is indefinite: mu_{degree} = {value:e}")]
    Indefinite { degree: usize, value: f64 },

    #[error("ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("step size too large: {0}")]
    StepSize(String),

    #[error("iteration diverged: {0}")]
    Divergence(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{failed} of {total} trials failed")]
    TooManyFailures {
        failed: usize,
        total: usize,
        partial: Box<ExperimentResult>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag, stable across releases.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Domain(_) => "domain",
            Error::Overflow(_) => "overflow",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonConvergence(_) => "non_convergence",
            Error::Indefinite { .. } => "indefinite",
            Error::IllConditioned(_) => "ill_conditioned",
            Error::Linalg(_) => "linalg",
            Error::StepSize(_) => "step_size",
            Error::Divergence(_) => "divergence",
            Error::Unsupported(_) => "unsupported",
            Error::Config(_) => "config",
            Error::TooManyFailures { .. } => "too_many_failures",
            Error::Io(_) => "io",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
