use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default duration of one speech segment, in milliseconds.
pub const DEFAULT_SEGMENT_MS: u32 = 640;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SourceError {
    #[error("source sequence is empty")]
    Empty,
    #[error("speech segments must have a positive duration")]
    ZeroSegment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Text,
    Speech { segment_ms: u32 },
}

/// The input stream: text words, or fixed-duration speech segments
/// identified by opaque handles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceSequence {
    kind: SourceKind,
    elements: Vec<String>,
}

impl SourceSequence {
    pub fn text<I, S>(words: I) -> Result<Self, SourceError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::build(SourceKind::Text, words)
    }

    pub fn speech<I, S>(segments: I, segment_ms: u32) -> Result<Self, SourceError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        if segment_ms == 0 {
            return Err(SourceError::ZeroSegment);
        }
        Self::build(SourceKind::Speech { segment_ms }, segments)
    }

    fn build<I, S>(kind: SourceKind, elements: I) -> Result<Self, SourceError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let elements: Vec<String> = elements.into_iter().map(Into::into).collect();
        if elements.is_empty() {
            return Err(SourceError::Empty);
        }
        Ok(Self { kind, elements })
    }

    pub fn kind(&self) -> SourceKind {
        self.kind
    }

    pub fn segment_ms(&self) -> Option<u32> {
        match self.kind {
            SourceKind::Speech { segment_ms } => Some(segment_ms),
            SourceKind::Text => None,
        }
    }

    pub fn is_speech(&self) -> bool {
        matches!(self.kind, SourceKind::Speech { .. })
    }

    /// Number of source elements, `J`.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[String] {
        &self.elements
    }

    /// The first `read` elements.
    pub fn prefix(&self, read: usize) -> &[String] {
        &self.elements[..read.min(self.elements.len())]
    }

    /// Total duration in milliseconds for speech, `None` for text.
    pub fn duration_ms(&self) -> Option<f64> {
        self.segment_ms().map(|ms| f64::from(ms) * self.elements.len() as f64)
    }

    /// Keeps at most `max_len` leading elements.
    pub fn truncated(&self, max_len: usize) -> Self {
        let keep = max_len.max(1).min(self.elements.len());
        Self {
            kind: self.kind,
            elements: self.elements[..keep].to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_rules() {
        assert_eq!(SourceSequence::text(Vec::<String>::new()), Err(SourceError::Empty));
        assert_eq!(SourceSequence::speech(["s0"], 0), Err(SourceError::ZeroSegment));
        let s = SourceSequence::speech(["s0", "s1", "s2"], 640).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.segment_ms(), Some(640));
        assert_eq!(s.duration_ms(), Some(1920.0));
        assert_eq!(s.prefix(2), &["s0".to_string(), "s1".to_string()]);
        let t = SourceSequence::text(["a", "b"]).unwrap();
        assert_eq!(t.segment_ms(), None);
        assert_eq!(t.truncated(1).len(), 1);
    }
}
