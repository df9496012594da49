use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum SdssError {
    #[error("graph must have at least one node")]
    EmptyGraph,

    #[error("node index {index} out of range for graph with {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index set for {0} is empty")]
    EmptyIndexSet(&'static str),

    #[error(
        "balance constraint infeasible: {k} parts of {n} nodes cannot satisfy epsilon = {epsilon}"
    )]
    InfeasibleBalance { n: usize, k: usize, epsilon: f64 },

    #[error("class {class} has {available} nodes but {required} were requested")]
    ClassTooSmall {
        class: usize,
        available: usize,
        required: usize,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, SdssError>;

impl SdssError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SdssError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        SdssError::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
