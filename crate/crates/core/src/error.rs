use alloc::string::String;

/// Errors raised by the simulation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid coupling matrix: {0}")]
    InvalidCoupling(String),
    #[error("integration failed at t = {time}: {reason}")]
    IntegrationFailure { time: f64, reason: String },
    #[error("problem too large: {0}")]
    TooLarge(String),
    #[error("empty distribution: {0}")]
    EmptyDistribution(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
