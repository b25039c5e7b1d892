use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Arguments violate a documented precondition.
    #[error("invalid argument: {0}")]
    Usage(String),
    /// Input dimensions disagree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    /// The optimizer did not converge.
    #[error("solver failure: {0}")]
    Solver(String),
    /// A numerical routine could not produce a trustworthy answer.
    #[error("numerical failure: {0}")]
    Numeric(String),
    /// Input data is degenerate for the requested operation.
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
