use thiserror::Error;

/// Errors produced by parsing, validation and the resolution pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input text; carries the 1-based line number.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Input parsed but violates a structural invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// A key partition does not cover the document it is scored against.
    #[error("coverage error: {0}")]
    Coverage(String),

    /// An operation was called outside its contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The operation is well-formed but does not apply to this argument.
    #[error("not applicable: {0}")]
    NotApplicable(String),

    /// Invalid configuration value.
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
