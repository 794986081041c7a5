//! Crate-wide error type.

/// Errors produced by index-set construction, sampling, fitting, the spatial
/// solver and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A caller-visible contract was violated (e.g. an index set that is not
    /// downward closed was passed to an interpolation routine).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// An enumeration would produce more members than the configured cap.
    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    /// A quantity left the representable floating-point range.
    #[error("out of range: {0}")]
    Range(String),

    /// A sampling density could not be built from the given basis.
    #[error("degenerate density: {0}")]
    DegenerateDensity(String),

    /// Non-finite data was encountered where a finite value is required.
    #[error("non-finite data: {0}")]
    NonFinite(String),

    /// The linear solver failed (loss of positive definiteness, singular
    /// system, or an iteration cap).
    #[error("solver failure: {0}")]
    Solver(String),

    /// Rate calibration could not produce a usable slope.
    #[error("calibration failure: {0}")]
    Calibration(String),

    /// Configuration file could not be read or parsed.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::ContractViolation(msg.into())
    }
}
