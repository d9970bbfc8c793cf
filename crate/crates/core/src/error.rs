use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read or write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// An invariant of the model is violated; `subject` names the offending
    /// node, edge, or parameter.
    #[error("invalid {subject}: {message}")]
    Validation { subject: String, message: String },

    #[error("instance too large: {0}")]
    Capacity(String),

    /// A message or belief underflowed to all zeros (or became non-finite).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("contract violation: {0}")]
    Contract(String),
}

impl Error {
    pub(crate) fn validation(subject: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            subject: subject.into(),
            message: message.into(),
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }

    /// Prefixes a numerical error with extra context, leaving other kinds untouched.
    pub(crate) fn tag_numerical(self, context: impl std::fmt::Display) -> Self {
        match self {
            Error::Numerical(msg) => Error::Numerical(format!("{context}: {msg}")),
            other => other,
        }
    }
}
