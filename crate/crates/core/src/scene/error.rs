use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("data error: {what} at gaussian {index}")]
    Data { index: usize, what: String },
    #[error("nodes {first} and {second} both claim gaussian {index}")]
    Overlap {
        first: String,
        second: String,
        index: usize,
    },
    #[error("node {node} references gaussian {index} but the set has {count}")]
    IndexRange {
        node: String,
        index: usize,
        count: usize,
    },
    #[error("node {node}: pose track times must be strictly increasing")]
    NonMonotoneTimes { node: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("manifest parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

impl SceneError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
