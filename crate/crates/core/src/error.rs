use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input is not valid UTF-8: {0}")]
    InvalidEncoding(#[from] std::string::FromUtf8Error),
    #[error("corpus contains no sentences")]
    EmptyCorpus,
    #[error("n-gram order {0} outside supported range 1..=5")]
    OrderOutOfRange(usize),
    #[error("context {0:?} was never observed")]
    UnseenContext(Vec<u32>),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    IdOutOfRange { id: u32, vocab_size: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("dataset order {found} does not match model order {expected}")]
    OrderMismatch { expected: usize, found: usize },
    #[error("context is empty")]
    EmptyContext,
    #[error("missing model: {0}")]
    MissingModel(String),
    #[error("{what} format version {found} is not supported (expected {expected})")]
    VersionMismatch {
        what: &'static str,
        expected: u32,
        found: u32,
    },
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }
}
