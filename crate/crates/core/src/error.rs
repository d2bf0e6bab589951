use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no queries derivable: answer list is empty")]
    NoQueries,

    #[error("bad-word list missing: {0}")]
    MissingBadWords(PathBuf),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("embedding file: {0}")]
    Embedding(String),

    #[error("empty token list")]
    EmptyTokens,

    #[error("no candidates")]
    NoCandidates,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("provider: {0}")]
    Provider(String),

    #[error("entailment failed for statement {statement:?}: {source}")]
    Entailment {
        statement: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl ToString) -> Self {
        Error::Parse {
            line,
            message: message.to_string(),
        }
    }
}
