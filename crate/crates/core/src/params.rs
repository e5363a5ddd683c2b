//! Policy hyperparameters and the named presets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::source::DEFAULT_SEGMENT_MS;

/// The four `[L, U]` latency settings, lowest latency first.
pub const LATENCY_LADDER: [(usize, usize); 4] = [(1, 4), (3, 4), (5, 6), (7, 6)];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("invalid hyperparameter {name}: {reason}")]
    Invalid { name: &'static str, reason: String },
    #[error("unknown preset {0:?} (known: de-en, en-de, fr-en)")]
    UnknownPreset(String),
}

/// Thresholds and range settings for one run.
///
/// `alpha` may exceed 1; since no probability does, that switches the
/// confidence trigger off. `delta = f64::INFINITY` does the same for the
/// divergence trigger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Divergence threshold, nats.
    pub delta: f64,
    /// Confidence threshold on the maximum probability.
    pub alpha: f64,
    /// Elements read before the first emission (`L`).
    pub pre_read: usize,
    /// Extra elements the policy may read beyond the lower bound (`U`).
    pub autonomy: usize,
    /// Lag for the fixed wait-k schedule.
    pub k: usize,
    pub segment_ms: u32,
}

impl Default for HyperParams {
    fn default() -> Self {
        let (pre_read, autonomy) = LATENCY_LADDER[0];
        Self {
            delta: 9.0,
            alpha: 0.6,
            pre_read,
            autonomy,
            k: 1,
            segment_ms: DEFAULT_SEGMENT_MS,
        }
    }
}

impl HyperParams {
    /// Named presets: `de-en`, `en-de`, `fr-en`. Range settings start at
    /// the lowest rung of [`LATENCY_LADDER`].
    pub fn preset(name: &str) -> Result<Self, ParamError> {
        let (delta, alpha) = match name {
            "de-en" => (9.0, 0.6),
            "en-de" => (7.5, 0.6),
            "fr-en" => (7.0, 0.5),
            other => return Err(ParamError::UnknownPreset(other.to_string())),
        };
        Ok(Self {
            delta,
            alpha,
            ..Self::default()
        })
    }

    pub fn with_range(mut self, pre_read: usize, autonomy: usize) -> Self {
        self.pre_read = pre_read;
        self.autonomy = autonomy;
        self
    }

    pub fn with_thresholds(mut self, delta: f64, alpha: f64) -> Self {
        self.delta = delta;
        self.alpha = alpha;
        self
    }

    /// Both triggers off: every step runs to the upper range bound.
    pub fn triggers_disabled(self) -> Self {
        self.with_thresholds(f64::INFINITY, 1.01)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let bad = |name, reason: &str| {
            Err(ParamError::Invalid {
                name,
                reason: reason.to_string(),
            })
        };
        if self.delta.is_nan() || self.delta < 0.0 {
            return bad("delta", "must be a non-negative number");
        }
        if self.alpha.is_nan() || self.alpha < 0.0 {
            return bad("alpha", "must be a non-negative number");
        }
        if self.pre_read < 1 {
            return bad("pre_read", "must be at least 1");
        }
        if self.k < 1 {
            return bad("k", "must be at least 1");
        }
        if self.segment_ms == 0 {
            return bad("segment_ms", "must be positive");
        }
        Ok(())
    }
}
