use thiserror::Error;

/// Errors raised by code construction, decoding setup and the simulation harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// The requested operation is not supported for these parameters,
    /// e.g. trellis decoding with too many CRC states.
    #[error("capability: {0}")]
    Capability(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("budget exhausted: {0}")]
    BudgetExhausted(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
