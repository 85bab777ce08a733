use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of range or inconsistent. The message names
    /// the offending key or field.
    #[error("invalid configuration: {0}")]
    Validation(String),

    /// Configuration text could not be parsed.
    #[error("configuration parse error: {0}")]
    Parse(String),

    /// The circuit settles in at least one branch instead of cycling. The list
    /// names every trapping branch.
    #[error("configuration does not self-oscillate; trapping branch(es): {0}")]
    NotOscillating(String),

    /// A state variable left the finite range or an iteration failed to converge.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// A file or directory operation failed. The message names the path.
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// Exit code the CLI maps this error to: validation and parse failures are
    /// usage errors (1), everything else is a runtime failure (2).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Parse(_) => 1,
            _ => 2,
        }
    }
}
