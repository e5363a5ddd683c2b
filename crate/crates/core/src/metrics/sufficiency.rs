use serde::{Deserialize, Serialize};

use super::MetricError;

/// `a_i`: 1-based index of the last source element aligned to target word
/// `i`, or 0 when the word is unaligned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AlignmentSequence(Vec<usize>);

impl AlignmentSequence {
    pub fn new(a: Vec<usize>, source_len: usize) -> Result<Self, MetricError> {
        if let Some((index, &value)) = a.iter().enumerate().find(|(_, &v)| v > source_len) {
            return Err(MetricError::AlignmentOutOfRange {
                index,
                value,
                source_len,
            });
        }
        Ok(Self(a))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Fraction of target words emitted after their aligned source was read.
/// Unaligned words always count.
pub fn sufficiency_rate(a: &AlignmentSequence, g: &[usize]) -> Result<f64, MetricError> {
    if a.len() != g.len() {
        return Err(MetricError::LengthMismatch {
            left: a.len(),
            right: g.len(),
        });
    }
    if g.is_empty() {
        return Err(MetricError::EmptyHypothesis);
    }
    let hits = a.0.iter().zip(g).filter(|(ai, gi)| ai <= gi).count();
    Ok(hits as f64 / g.len() as f64)
}
