use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("resample error: {0}")]
    Resample(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("training diverged at step {step} (non-finite loss)")]
    Divergence { step: usize, trace: Vec<LossRecord> },

    #[error("metric undefined: {0}")]
    MetricUndefined(String),

    #[error("artifact error: {0}")]
    Artifact(String),

    #[error("pipeline error: {0}")]
    Pipeline(String),

    #[error("sweep failed at {failed} of {total} points")]
    SweepFailed {
        failed: usize,
        total: usize,
        partial: Box<crate::pipeline::SweepResult>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// One entry of a generator training-loss trace.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub discriminator: f64,
    pub generator: f64,
}
