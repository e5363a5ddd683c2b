//! Latency, quality and sufficiency metrics.

mod latency;
mod quality;
mod sufficiency;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use latency::{average_lagging_speech, average_lagging_text, computation_aware_al, merge_subwords};
pub use quality::{corpus_bleu, corpus_wer, edit_distance, word_error_rate};
pub use sufficiency::{sufficiency_rate, AlignmentSequence};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("hypothesis is empty")]
    EmptyHypothesis,
    #[error("reference is empty")]
    EmptyReference,
    #[error("corpus size mismatch: {references} references, {hypotheses} hypotheses")]
    CorpusMismatch { references: usize, hypotheses: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("malformed timeline: {0}")]
    MalformedTimeline(String),
    #[error("alignment entry {value} at position {index} exceeds source length {source_len}")]
    AlignmentOutOfRange {
        index: usize,
        value: usize,
        source_len: usize,
    },
}

/// Metrics for one sample or one corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Average lagging, in words (text) or milliseconds (speech).
    pub al: f64,
    /// Computation-aware average lagging in milliseconds.
    pub al_ca: Option<f64>,
    pub bleu: f64,
    pub wer: f64,
    pub sufficiency: Option<f64>,
}
