use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left} vs {right}")]
    Dimension {
        op: &'static str,
        left: String,
        right: String,
    },

    #[error("tape state error: {0}")]
    State(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("gap in series for prosumer {prosumer} on {date}: {detail}")]
    Gap {
        prosumer: String,
        date: String,
        detail: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("insufficient history for prosumer {prosumer}: {days} days available, window needs {window}")]
    InsufficientHistory {
        prosumer: String,
        days: usize,
        window: usize,
    },

    #[error("variate {variate} is constant over the training split (min = max = {value})")]
    ScaleDegenerate { variate: String, value: f64 },

    #[error("assignment error: {0}")]
    Assignment(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("training diverged at epoch {epoch} (learning rate {learning_rate}): loss is not finite")]
    Divergence { epoch: usize, learning_rate: f64 },

    #[error("aggregation error for center {center}: {detail}")]
    Aggregation { center: String, detail: String },

    #[error("y has zero variance; R² is undefined")]
    DegenerateVariance,

    #[error("center {center} failed: {source}")]
    Client {
        center: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, left: impl ToString, right: impl ToString) -> Self {
        Error::Dimension {
            op,
            left: left.to_string(),
            right: right.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
