use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors surfaced by the explanation engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("lexicon could not be loaded from {path}: {reason}")]
    MissingLexicon { path: PathBuf, reason: String },

    #[error("model unavailable: {0}")]
    ModelUnavailable(String),

    #[error("model protocol violation: {0}")]
    ProtocolViolation(String),

    /// The model answered a request with an explicit error reply.
    #[error("model reported an error: {0}")]
    ModelError(String),

    #[error("input text is empty after tokenization")]
    EmptyInput,

    #[error("document `{0}` contains no tokens")]
    EmptyDocument(String),

    #[error("degenerate clustering input: {0}")]
    DegenerateInput(String),

    #[error("corpus contains no usable explanations")]
    EmptyCorpus,

    #[error("invalid configuration: {0}")]
    BadConfig(String),

    #[error("invalid feature: {0}")]
    InvalidFeature(String),

    #[error("unsupported report schema version `{found}` (expected `{expected}`)")]
    SchemaVersion { found: String, expected: String },

    #[error("malformed report: {0}")]
    MalformedReport(String),

    #[error("I/O failure: {0}")]
    IoFailure(#[from] std::io::Error),
}
