use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_read, Generator, ProviderError};
use crate::dist::{make_distribution, Distribution, TokenId, Vocabulary};
use crate::source::SourceSequence;

/// Explicit lookup table from `(read, prefix)` to weights.
#[derive(Debug, Clone)]
pub struct TableSpec {
    pub vocabulary: Vocabulary,
    pub entries: HashMap<(usize, Vec<TokenId>), Vec<f64>>,
}

/// On-disk form of a [`TableSpec`], with tokens spelled as strings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableFile {
    pub vocab: Vec<String>,
    pub eos: String,
    pub entries: Vec<TableFileEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableFileEntry {
    pub read: usize,
    pub prefix: Vec<String>,
    pub weights: Vec<f64>,
}

/// Provider that answers from a [`TableSpec`]. All distributions are
/// normalized once, at construction.
#[derive(Debug, Clone)]
pub struct TableProvider {
    vocabulary: Vocabulary,
    table: HashMap<(usize, Vec<TokenId>), Distribution>,
}

impl TableProvider {
    pub fn new(spec: TableSpec) -> Result<Self, ProviderError> {
        let size = spec.vocabulary.len();
        let mut table = HashMap::with_capacity(spec.entries.len());
        for ((read, prefix), weights) in spec.entries {
            if weights.len() != size {
                return Err(ProviderError::InvalidSpec(format!(
                    "entry read={read} prefix={prefix:?} has {} weights for {size} tokens",
                    weights.len()
                )));
            }
            if read == 0 {
                return Err(ProviderError::InvalidSpec("read counts start at 1".into()));
            }
            if let Some(bad) = prefix.iter().find(|&&t| t >= size) {
                return Err(ProviderError::InvalidSpec(format!("prefix token {bad} out of range")));
            }
            table.insert((read, prefix), make_distribution(&weights)?);
        }
        Ok(Self {
            vocabulary: spec.vocabulary,
            table,
        })
    }

    pub fn from_file_format(file: TableFile) -> Result<Self, ProviderError> {
        let vocabulary = Vocabulary::with_eos(file.vocab, &file.eos)?;
        let mut entries = HashMap::with_capacity(file.entries.len());
        for e in file.entries {
            let prefix = e
                .prefix
                .iter()
                .map(|t| {
                    vocabulary
                        .id(t)
                        .ok_or_else(|| ProviderError::InvalidSpec(format!("unknown token {t:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            entries.insert((e.read, prefix), e.weights);
        }
        Self::new(TableSpec { vocabulary, entries })
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path).map_err(|e| ProviderError::Io(format!("{}: {e}", path.display())))?;
        let file: TableFile =
            serde_json::from_str(&text).map_err(|e| ProviderError::InvalidSpec(format!("{}: {e}", path.display())))?;
        Self::from_file_format(file)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Direct lookup, without the source-length check.
    pub fn lookup(&self, read: usize, prefix: &[TokenId]) -> Result<&Distribution, ProviderError> {
        self.table
            .get(&(read, prefix.to_vec()))
            .ok_or_else(|| ProviderError::UnknownState {
                read,
                prefix: prefix.to_vec(),
            })
    }
}

impl Generator for TableProvider {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    fn next_distribution(
        &self,
        source: &SourceSequence,
        read: usize,
        prefix: &[TokenId],
    ) -> Result<Distribution, ProviderError> {
        check_read(read, source.len())?;
        self.lookup(read, prefix).cloned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn provider() -> TableProvider {
        let vocabulary = Vocabulary::with_eos(["a"], "</s>").unwrap();
        let mut entries = HashMap::new();
        entries.insert((1, vec![]), vec![9.0, 1.0]);
        entries.insert((2, vec![0]), vec![1.0, 1.0]);
        TableProvider::new(TableSpec { vocabulary, entries }).unwrap()
    }

    #[test]
    fn lookups() {
        let p = provider();
        let src = SourceSequence::text(["x", "y", "z"]).unwrap();
        assert_eq!(p.next_distribution(&src, 1, &[]).unwrap().probs(), &[0.9, 0.1]);
        assert_eq!(p.next_distribution(&src, 2, &[0]).unwrap().probs(), &[0.5, 0.5]);
        assert_eq!(
            p.next_distribution(&src, 3, &[0, 1]),
            Err(ProviderError::UnknownState {
                read: 3,
                prefix: vec![0, 1]
            })
        );
        assert!(matches!(
            p.next_distribution(&src, 4, &[]),
            Err(ProviderError::ReadOutOfRange { .. })
        ));
    }

    #[test]
    fn rejects_wrong_width() {
        let vocabulary = Vocabulary::with_eos(["a"], "</s>").unwrap();
        let mut entries = HashMap::new();
        entries.insert((1, vec![]), vec![1.0, 1.0, 1.0]);
        assert!(TableProvider::new(TableSpec { vocabulary, entries }).is_err());
    }

    #[test]
    fn file_format() {
        let file: TableFile = serde_json::from_str(
            r#"{"vocab": ["a", "b"], "eos": "</s>",
                "entries": [{"read": 1, "prefix": [], "weights": [1, 3, 0]},
                            {"read": 1, "prefix": ["b"], "weights": [0, 0, 1]}]}"#,
        )
        .unwrap();
        let p = TableProvider::from_file_format(file).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.lookup(1, &[]).unwrap().probs(), &[0.25, 0.75, 0.0]);
        assert_eq!(p.lookup(1, &[1]).unwrap().probs(), &[0.0, 0.0, 1.0]);
    }
}
