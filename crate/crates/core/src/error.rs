use std::io;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("sentence {sentence}: {message}")]
    Structure { sentence: String, message: String },

    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: [usize; 2],
        right: [usize; 2],
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("missing prediction for sentence {sentence}, predicate {predicate}")]
    MissingPrediction { sentence: String, predicate: usize },

    #[error("instances misaligned: {0}")]
    Misaligned(String),

    #[error("label id {id} out of range for {classes} classes")]
    LabelOutOfRange { id: usize, classes: usize },

    #[error("retrieval: {0}")]
    Retrieval(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn structure(sentence: &str, message: impl Into<String>) -> Self {
        Error::Structure {
            sentence: sentence.to_owned(),
            message: message.into(),
        }
    }
}
