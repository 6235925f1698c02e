use thiserror::Error;

/// Errors raised by the m-test kernels, enumerators and oracles.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violated an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The requested work exceeds a configured capacity cap.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A numeric routine failed to converge or produced a non-finite value.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn argument(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}
