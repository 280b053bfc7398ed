//! Driver for the subpopulation augmentation study: configuration, the
//! on-disk results layout, reports and plots.

pub mod config;
pub mod plots;
pub mod report;
pub mod run;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{DataSource, GeneratorKind, RunConfig, Targets};
pub use report::{emit_report, render_comparison_csv, render_comparison_text, render_sweep_text};
pub use run::{run_end_to_end, verify_manifest, RunSummary};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] subpop_core::Error),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot read {path}: {message}")]
    Results { path: PathBuf, message: String },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 config, 3 data, 4 training, 5 too many failed sweep points,
    /// 1 anything else.
    pub fn exit_code(&self) -> i32 {
        use subpop_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } | CliError::Results { .. } => 3,
            CliError::Core(e) => match e {
                E::Config(_) => 2,
                E::Schema(_) | E::Parse { .. } | E::Data(_) | E::Resample(_) | E::Io { .. } | E::Artifact(_) => 3,
                E::MetricUndefined(_) => 3,
                E::Training(_) | E::Divergence { .. } => 4,
                E::SweepFailed { .. } => 5,
                E::Pipeline(_) => 1,
            },
        }
    }
}
