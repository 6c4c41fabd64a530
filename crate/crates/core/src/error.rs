//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input document; `at` names the offending location
    /// (a `data[i].paragraphs[j]...` style path for JSON inputs, or a
    /// `file:line` for line-delimited formats).
    #[error("parse error at {at}: {message}")]
    Parse { at: String, message: String },

    #[error("duplicate id `{id}`")]
    DuplicateId { id: String },

    #[error("corpus has no paragraphs")]
    EmptyCorpus,

    #[error("paragraph `{id}` not found")]
    ParagraphNotFound { id: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("zero-norm vector")]
    ZeroNorm,

    /// Remote provider failure, after `retries` retries. `status` is the
    /// last HTTP status when one was received.
    #[error("provider error (status {status:?} after {retries} retries): {message}")]
    Provider {
        status: Option<u16>,
        retries: u32,
        message: String,
    },

    #[error("could not parse effectiveness scores: {0}")]
    ScoreParse(String),

    #[error("replay fixture missing for key {key}")]
    FixtureMissing { key: String },

    #[error("embedding cache miss for key {key}")]
    CacheMiss { key: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(at: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            at: at.into(),
            message: message.into(),
        }
    }
}
