use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("insufficient evidence: {n} observation(s), at least {required} required")]
    InsufficientEvidence { n: u64, required: u64 },

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("illegal state transition: {0}")]
    State(String),

    /// A report that carries no regret cannot update the knowledge base.
    #[error("report is not regretted; nothing to record")]
    NotRegretted,
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn parse_line(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column: 0,
            message: message.into(),
        }
    }
}
