use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::metrics::AlignmentSequence;
use crate::source::{SourceSequence, DEFAULT_SEGMENT_MS};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub source: SourceSequence,
    pub reference: Vec<String>,
    pub alignment: Option<AlignmentSequence>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    source: Vec<String>,
    reference: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alignment: Option<String>,
    #[serde(default = "text_kind")]
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    segment_ms: Option<u32>,
}

fn text_kind() -> String {
    "text".into()
}

/// Reads `src-tgt` pairs (0-based) into `a_i = 1 + max{src : (src, i-1)}`,
/// with 0 for unaligned target words.
pub fn parse_pharaoh(s: &str, target_len: usize, source_len: usize) -> Result<AlignmentSequence, HarnessError> {
    let mut a = vec![0usize; target_len];
    for pair in s.split_whitespace() {
        let (src, tgt) = pair
            .split_once('-')
            .ok_or_else(|| HarnessError::parse(None, format!("alignment pair {pair:?} is not src-tgt")))?;
        let num = |x: &str| {
            x.parse::<usize>()
                .map_err(|_| HarnessError::parse(None, format!("alignment pair {pair:?} is not numeric")))
        };
        let (src, tgt) = (num(src)?, num(tgt)?);
        if src >= source_len || tgt >= target_len {
            return Err(HarnessError::parse(
                None,
                format!("alignment pair {pair:?} outside {source_len} source x {target_len} target words"),
            ));
        }
        a[tgt] = a[tgt].max(src + 1);
    }
    AlignmentSequence::new(a, source_len).map_err(|e| HarnessError::parse(None, e.to_string()))
}

/// Inverse of [`parse_pharaoh`] for the last-aligned-position form.
pub fn to_pharaoh(a: &AlignmentSequence) -> String {
    a.as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &ai)| ai > 0)
        .map(|(i, &ai)| format!("{}-{}", ai - 1, i))
        .collect::<Vec<_>>()
        .join(" ")
}

fn to_sample(rec: Record, line: usize) -> Result<Sample, HarnessError> {
    let err = |m: String| HarnessError::parse(Some(line), m);
    let source = match (rec.kind.as_str(), rec.segment_ms) {
        ("text", None) => SourceSequence::text(rec.source),
        ("text", Some(_)) => return Err(err("segment_ms is only valid for speech records".into())),
        ("speech", ms) => SourceSequence::speech(rec.source, ms.unwrap_or(DEFAULT_SEGMENT_MS)),
        (other, _) => return Err(err(format!("unknown kind {other:?}"))),
    }
    .map_err(|e| err(e.to_string()))?;
    if rec.reference.is_empty() {
        return Err(err("reference is empty".into()));
    }
    let alignment = rec
        .alignment
        .as_deref()
        .map(|s| parse_pharaoh(s, rec.reference.len(), source.len()))
        .transpose()
        .map_err(|e| match e {
            HarnessError::Parse { message, .. } => err(message),
            other => other,
        })?;
    Ok(Sample {
        id: rec.id,
        source,
        reference: rec.reference,
        alignment,
    })
}

/// Parses line-delimited JSON records. Blank lines are skipped.
pub fn parse_corpus(text: &str) -> Result<Vec<Sample>, HarnessError> {
    let mut samples = Vec::new();
    let mut ids = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(raw).map_err(|e| HarnessError::parse(Some(line), e.to_string()))?;
        if !ids.insert(rec.id.clone()) {
            return Err(HarnessError::DuplicateId(rec.id));
        }
        samples.push(to_sample(rec, line)?);
    }
    Ok(samples)
}

pub fn load_corpus(path: &Path) -> Result<Vec<Sample>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_corpus(&text)
}

pub fn write_corpus(path: &Path, samples: &[Sample]) -> Result<(), HarnessError> {
    let mut out = String::new();
    for s in samples {
        let rec = Record {
            id: s.id.clone(),
            source: s.source.elements().to_vec(),
            reference: s.reference.clone(),
            alignment: s.alignment.as_ref().map(to_pharaoh),
            kind: if s.source.is_speech() { "speech" } else { "text" }.into(),
            segment_ms: s.source.segment_ms(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        out.push('\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pharaoh_examples() {
        assert_eq!(parse_pharaoh("0-0 1-1", 2, 2).unwrap().as_slice(), &[1, 2]);
        assert_eq!(parse_pharaoh("0-1 2-1", 2, 3).unwrap().as_slice(), &[0, 3]);
        assert!(matches!(parse_pharaoh("5-0", 1, 3), Err(HarnessError::Parse { .. })));
        assert!(parse_pharaoh("0-3", 2, 3).is_err());
        assert!(parse_pharaoh("0:1", 2, 3).is_err());
        assert!(parse_pharaoh("a-1", 2, 3).is_err());
        assert_eq!(parse_pharaoh("", 2, 3).unwrap().as_slice(), &[0, 0]);
    }

    #[test]
    fn minimal_text_corpus() {
        let s = parse_corpus(r#"{"id": "a", "source": ["x", "y"], "reference": ["X", "Y"]}"#).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].source.len(), 2);
        assert!(!s[0].source.is_speech());
        assert!(s[0].alignment.is_none());
    }

    #[test]
    fn speech_defaults_segment() {
        let s = parse_corpus(r#"{"id": "a", "kind": "speech", "source": ["0", "1"], "reference": ["hi"]}"#).unwrap();
        assert_eq!(s[0].source.segment_ms(), Some(640));
        let s =
            parse_corpus(r#"{"id": "a", "kind": "speech", "segment_ms": 320, "source": ["0"], "reference": ["hi"]}"#)
                .unwrap();
        assert_eq!(s[0].source.segment_ms(), Some(320));
    }

    #[test]
    fn corpus_errors() {
        let bad_align = "\n{\"id\": \"a\", \"source\": [\"x\"], \"reference\": [\"X\"], \"alignment\": \"0-1\"}";
        match parse_corpus(bad_align) {
            Err(HarnessError::Parse { line: Some(2), .. }) => {}
            other => panic!("{other:?}"),
        }
        let dup = "{\"id\": \"a\", \"source\": [\"x\"], \"reference\": [\"X\"]}\n{\"id\": \"a\", \"source\": [\"x\"], \"reference\": [\"X\"]}";
        assert!(matches!(parse_corpus(dup), Err(HarnessError::DuplicateId(id)) if id == "a"));
        assert!(matches!(
            parse_corpus("{not json"),
            Err(HarnessError::Parse { line: Some(1), .. })
        ));
        let empty_ref = r#"{"id": "a", "source": ["x"], "reference": []}"#;
        assert!(parse_corpus(empty_ref).is_err());
        let text_seg = r#"{"id": "a", "source": ["x"], "reference": ["y"], "segment_ms": 5}"#;
        assert!(parse_corpus(text_seg).is_err());
    }

    #[test]
    fn round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let text = concat!(
            r#"{"id": "a", "source": ["x", "y", "z"], "reference": ["X", "Y"], "alignment": "0-1 2-1"}"#,
            "\n",
            r#"{"id": "b", "kind": "speech", "source": ["0", "1"], "reference": ["hi"], "segment_ms": 640}"#,
            "\n"
        );
        let samples = parse_corpus(text).unwrap();
        write_corpus(&path, &samples).unwrap();
        assert_eq!(load_corpus(&path).unwrap(), samples);
    }

    proptest! {
        #[test]
        fn pharaoh_then_offline_is_sufficient(
            (j, pairs) in (1usize..10).prop_flat_map(|j| (Just(j), prop::collection::vec((0..j, 0usize..8), 0..20)))
        ) {
            let i = 8;
            let text: Vec<String> = pairs.iter().map(|(s, t)| format!("{s}-{t}")).collect();
            let a = parse_pharaoh(&text.join(" "), i, j).unwrap();
            prop_assert_eq!(crate::metrics::sufficiency_rate(&a, &vec![j; i]).unwrap(), 1.0);
            prop_assert_eq!(parse_pharaoh(&to_pharaoh(&a), i, j).unwrap(), a);
        }
    }
}
