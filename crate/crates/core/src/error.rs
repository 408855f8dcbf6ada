use thiserror::Error;

/// Errors produced by the codec and its file formats.
#[derive(Debug, Error)]
pub enum CodecError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no partition found for any epsilon candidate")]
    NoPartitionFound,

    #[error("malformed compressed file: field `{field}`: {reason}")]
    Format { field: &'static str, reason: String },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CodecError> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(CodecError::InvalidArgument(msg.into()))
}
