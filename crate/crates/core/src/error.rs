use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum IlgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("duplicate domain points at indices {0} and {1}")]
    DuplicatePoint(usize, usize),

    #[error("coincident points: residual undefined for x = y")]
    CoincidentPoints,

    #[error("tameness check failed: {0}")]
    NotTame(String),

    #[error("Lipschitz bound violated by pair ({0}, {1})")]
    LipschitzViolated(usize, usize),

    #[error("unsupported case: {0}")]
    Unsupported(String),

    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, IlgError>;
