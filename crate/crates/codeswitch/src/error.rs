//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its documented constraints.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A language code is not registered where one was required.
    #[error("unknown language `{0}`")]
    UnknownLanguage(String),

    /// A language pair is missing from a corpus or model registry.
    #[error("unknown language pair {0}")]
    UnknownPair(String),

    /// A record in a line-delimited file could not be parsed.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Bad runtime input (sequence too long, mismatched lengths, ...).
    #[error("input error: {0}")]
    Input(String),

    /// An operation that needs data was handed none.
    #[error("empty corpus: {0}")]
    EmptyCorpus(String),

    /// Training produced a non-finite loss.
    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    /// A checkpoint file is malformed or incompatible.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// A pipeline stage failed; partial artifacts are left on disk.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
