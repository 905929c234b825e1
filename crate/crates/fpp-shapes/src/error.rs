//! Crate-wide error type.
//!
//! Errors are split by how a caller should react:
//! [`Error::Usage`] for invalid arguments or configuration,
//! [`Error::Format`] for malformed data files,
//! [`Error::Numeric`] for diagnostic failures inside numeric routines
//! (non-convergence, undefined moments, model runaway).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// The caller asked for something invalid (bad parameter, bad spec string,
    /// inconsistent configuration).
    #[error("usage error: {0}")]
    Usage(String),

    /// A data file does not match the expected schema.
    #[error("format error in {path} (line {line}): {msg}")]
    Format {
        path: String,
        line: usize,
        msg: String,
    },

    /// A numeric routine failed to converge or hit an undefined quantity.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn format(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
