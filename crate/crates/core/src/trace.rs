use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Action {
    Read,
    Write,
}

/// Why a decision came out the way it did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Kl,
    Confidence,
    ForcedUpperBound,
    SourceExhausted,
    AwaitingInput,
}

impl Trigger {
    pub fn as_str(self) -> &'static str {
        match self {
            Trigger::Kl => "kl",
            Trigger::Confidence => "confidence",
            Trigger::ForcedUpperBound => "forced_upper_bound",
            Trigger::SourceExhausted => "source_exhausted",
            Trigger::AwaitingInput => "awaiting_input",
        }
    }
}

/// One consultation of the policy at target step `step` with `read` source
/// elements available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub read: usize,
    pub action: Action,
    pub kl: Option<f64>,
    pub max_prob: f64,
    pub trigger: Trigger,
}

/// `g` plus the per-consultation diagnostics that produced it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicyTrace {
    /// Source elements read when each token was emitted.
    pub g: Vec<usize>,
    pub steps: Vec<StepRecord>,
}

impl PolicyTrace {
    pub fn is_monotone(&self) -> bool {
        self.g.windows(2).all(|w| w[0] <= w[1])
    }

    /// Trigger counts over WRITE steps, plus READ count under `awaiting_input`.
    pub fn trigger_histogram(&self) -> std::collections::BTreeMap<Trigger, usize> {
        let mut hist = std::collections::BTreeMap::new();
        for s in &self.steps {
            *hist.entry(s.trigger).or_insert(0) += 1;
        }
        hist
    }
}
