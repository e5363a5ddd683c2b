//! Corpus ingestion, experiment orchestration and report emission.

mod config;
mod corpus;
mod diagnostics;
mod experiment;
mod sweep;
pub mod synth;

use std::path::PathBuf;

use thiserror::Error;

use crate::engine::DecodeError;
use crate::metrics::MetricError;
use crate::params::ParamError;
use crate::provider::ProviderError;

pub use config::{ClockSpec, ExperimentConfig, PolicySpec, ProviderSpec};
pub use corpus::{load_corpus, parse_corpus, parse_pharaoh, to_pharaoh, write_corpus, Sample};
pub use diagnostics::{export_kl_trace, kl_heatmap, kl_trace_tsv, sample_heatmap, KlRow};
pub use experiment::{
    decode_sample, run_experiment, run_on_corpus, Aggregate, ExperimentReport, RuntimeStats, SampleRecord, SampleStatus,
};
pub use sweep::{sweep, Grid, GridPoint, SweepRow, SweepTable};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("parse error{}: {message}", line.map(|l| format!(" on line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("decode result carries no policy diagnostics")]
    MissingDiagnostics,
    #[error("unknown sample id {0:?}")]
    UnknownSample(String),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        HarnessError::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    pub(crate) fn parse(line: Option<usize>, message: impl Into<String>) -> Self {
        HarnessError::Parse {
            line,
            message: message.into(),
        }
    }
}
