use thiserror::Error;

use crate::oracle::OracleError;
use crate::tree::TreeError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("saliency map is empty")]
    EmptyMap,

    #[error("label {0:?} is not in the model vocabulary")]
    UnknownLabel(String),

    #[error("empty label set")]
    EmptyLabelSet,

    #[error(transparent)]
    Tree(#[from] TreeError),

    #[error(transparent)]
    Oracle(#[from] OracleError),

    /// Explainer or oracle failure annotated with the pipeline stage it happened in.
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("file format error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn mismatch(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn at_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}
