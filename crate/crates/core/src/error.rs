use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("undefined distribution: abstract input {input:?} never observed at state {state:?}")]
    UndefinedDistribution { state: Vec<i32>, input: Vec<i32> },

    #[error("unsupported audio format: {field} is {found}, expected {expected}")]
    UnsupportedFormat {
        field: &'static str,
        found: String,
        expected: String,
    },

    #[error("clip fully trimmed: no sample exceeds the silence threshold")]
    FullyTrimmed,

    #[error("clip too short: {0}")]
    TooShort(String),

    #[error("jaccard index undefined for two empty profiles")]
    EmptyJaccard,

    #[error("reference text is empty")]
    EmptyReference,

    #[error("seed queue is empty")]
    EmptyQueue,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_string(),
            line,
            message: message.into(),
        }
    }
}
