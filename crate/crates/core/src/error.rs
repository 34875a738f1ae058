use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = SpamsError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SpamsError {
    #[error("dimension mismatch in {context}: {left} vs {right}")]
    Dimension {
        context: &'static str,
        left: String,
        right: String,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("format error in {source_name}: {message}")]
    Format { source_name: String, message: String },

    #[error("parse error in {source_name} at row {row}: {message}")]
    Parse {
        source_name: String,
        row: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot split dataset: {0}")]
    Split(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("class {class} has no training samples")]
    ClassEmpty { class: usize },

    #[error("training diverged at epoch {epoch}: non-finite cost")]
    Divergence { epoch: usize },

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("model file {path}: {message}")]
    Model { path: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SpamsError {
    pub(crate) fn dim(context: &'static str, left: impl ToString, right: impl ToString) -> Self {
        SpamsError::Dimension {
            context,
            left: left.to_string(),
            right: right.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SpamsError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(source_name: impl ToString, message: impl ToString) -> Self {
        SpamsError::Format {
            source_name: source_name.to_string(),
            message: message.to_string(),
        }
    }
}
