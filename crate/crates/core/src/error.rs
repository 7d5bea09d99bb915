use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the verification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid UTF-8 input at byte offset {offset}")]
    InvalidUtf8 { offset: usize },

    #[error("empty corpus: cannot induce an alphabet")]
    EmptyCorpus,

    #[error("symbol index {index} out of range for alphabet of size {size}")]
    SymbolOutOfRange { index: usize, size: usize },

    #[error("head index {index} out of range for {heads} heads")]
    HeadOutOfRange { index: usize, heads: usize },

    #[error("document of {len} symbols is too short to score with skip {skip}")]
    InsufficientText { len: usize, skip: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("corpus error: {0}")]
    Corpus(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("alphabet hash mismatch: model has {model:016x}, alphabet has {alphabet:016x}")]
    AlphabetMismatch { model: u64, alphabet: u64 },

    #[error("normalization needs at least two documents, got {0}")]
    TooFewDocuments(usize),

    #[error("mismatched problem sets: {0}")]
    ProblemMismatch(String),

    #[error("AUC is undefined when all labels belong to one class")]
    UndefinedAuc,

    #[error("non-finite gradient: {0}")]
    NonFinite(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("ensemble member {member} (seed {seed}) failed: {source}")]
    Member {
        member: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code: 2 for numerical failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFinite(_) | Error::Invariant(_) => 2,
            Error::Member { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
