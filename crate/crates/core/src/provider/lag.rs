use std::collections::BTreeMap;

use super::{check_read, Generator, ProviderError};
use crate::dist::{Distribution, TokenId, Vocabulary};
use crate::source::SourceSequence;

/// A synthetic language in which target token `i` is a fixed function of
/// source element `pi(i)` and nothing else.
///
/// Until `pi(i)` elements have been read the next-token distribution is
/// uniform; from then on it puts `1 - eta` on the right token. Ground-truth
/// alignments and the ideal policy are therefore known exactly.
#[derive(Debug, Clone)]
pub struct LagLanguageSpec {
    pub vocabulary: Vocabulary,
    pub source: Vec<String>,
    /// 1-based source position each target token needs.
    pub pi: Vec<usize>,
    /// Source token to target token.
    pub emit: BTreeMap<String, TokenId>,
    pub eta: f64,
}

#[derive(Debug, Clone)]
pub struct LagLanguage {
    vocabulary: Vocabulary,
    /// Correct token for every target position.
    targets: Vec<TokenId>,
    pi: Vec<usize>,
    eta: f64,
}

impl LagLanguage {
    pub fn new(spec: LagLanguageSpec) -> Result<Self, ProviderError> {
        let source_len = spec.source.len();
        if source_len == 0 {
            return Err(ProviderError::InvalidSpec("empty source".into()));
        }
        if spec.pi.len() != source_len {
            return Err(ProviderError::InvalidSpec(format!(
                "target length {} must equal source length {source_len}",
                spec.pi.len()
            )));
        }
        if !(0.0..0.5).contains(&spec.eta) {
            return Err(ProviderError::InvalidSpec(format!("eta {} outside [0, 0.5)", spec.eta)));
        }
        let mut targets = Vec::with_capacity(source_len);
        for (i, &p) in spec.pi.iter().enumerate() {
            if p == 0 || p > source_len {
                return Err(ProviderError::InvalidSpec(format!(
                    "pi({}) = {p} outside 1..={source_len}",
                    i + 1
                )));
            }
            let src_tok = &spec.source[p - 1];
            let tgt = *spec
                .emit
                .get(src_tok)
                .ok_or_else(|| ProviderError::InvalidSpec(format!("no emission for source token {src_tok:?}")))?;
            if tgt >= spec.vocabulary.len() {
                return Err(ProviderError::InvalidSpec(format!(
                    "emission target {tgt} outside vocabulary"
                )));
            }
            targets.push(tgt);
        }
        Ok(Self {
            vocabulary: spec.vocabulary,
            targets,
            pi: spec.pi,
            eta: spec.eta,
        })
    }

    /// Builds the language from a parallel pair: the vocabulary is the
    /// distinct target tokens plus `eos`, and `emit` sends
    /// `source[pi(i)]` to `target[i]`.
    pub fn from_parallel<S: AsRef<str>, T: AsRef<str>>(
        source: &[S],
        target: &[T],
        pi: &[usize],
        eta: f64,
        eos: &str,
    ) -> Result<Self, ProviderError> {
        let mut distinct: Vec<&str> = target.iter().map(AsRef::as_ref).collect();
        distinct.sort();
        distinct.dedup();
        let vocabulary = Vocabulary::with_eos(distinct, eos)?;
        Self::from_parallel_in(vocabulary, source, target, pi, eta)
    }

    /// Like [`LagLanguage::from_parallel`] over a given vocabulary, which
    /// must contain every target token.
    pub fn from_parallel_in<S: AsRef<str>, T: AsRef<str>>(
        vocabulary: Vocabulary,
        source: &[S],
        target: &[T],
        pi: &[usize],
        eta: f64,
    ) -> Result<Self, ProviderError> {
        if target.len() != pi.len() {
            return Err(ProviderError::InvalidSpec(format!(
                "{} target tokens but {} alignment entries",
                target.len(),
                pi.len()
            )));
        }
        let source: Vec<String> = source.iter().map(|s| s.as_ref().to_string()).collect();
        let mut emit = BTreeMap::new();
        for (i, (&p, tgt)) in pi.iter().zip(target).enumerate() {
            let src_tok = source
                .get(p.wrapping_sub(1))
                .ok_or_else(|| ProviderError::InvalidSpec(format!("pi({}) = {p} outside the source", i + 1)))?;
            let id = vocabulary.id(tgt.as_ref()).ok_or_else(|| {
                ProviderError::InvalidSpec(format!("target token {:?} not in the vocabulary", tgt.as_ref()))
            })?;
            if let Some(prev) = emit.insert(src_tok.clone(), id) {
                if prev != id {
                    return Err(ProviderError::InvalidSpec(format!(
                        "source token {src_tok:?} emits two different targets"
                    )));
                }
            }
        }
        Self::new(LagLanguageSpec {
            vocabulary,
            source,
            pi: pi.to_vec(),
            emit,
            eta,
        })
    }

    pub fn pi(&self) -> &[usize] {
        &self.pi
    }

    /// The correct target sequence, without EOS.
    pub fn targets(&self) -> &[TokenId] {
        &self.targets
    }

    pub fn target_len(&self) -> usize {
        self.targets.len()
    }

    fn peaked(&self, correct: TokenId) -> Distribution {
        let size = self.vocabulary.len();
        let rest = self.eta / (size - 1) as f64;
        let mut weights = vec![rest; size];
        weights[correct] = 1.0 - self.eta;
        Distribution::from_weights(&weights).expect("valid lag distribution")
    }
}

impl Generator for LagLanguage {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    fn next_distribution(
        &self,
        source: &SourceSequence,
        read: usize,
        prefix: &[TokenId],
    ) -> Result<Distribution, ProviderError> {
        let source_len = self.pi.len();
        check_read(read, source_len.min(source.len()))?;
        let step = prefix.len();
        if step > self.targets.len() {
            return Err(ProviderError::PrefixOverrun {
                len: step,
                max: self.targets.len(),
            });
        }
        // one step past the last target token: EOS, needing the whole source
        let (needed, correct) = match self.targets.get(step) {
            Some(&t) => (self.pi[step], t),
            None => (source_len, self.vocabulary.eos_id()),
        };
        if read >= needed {
            Ok(self.peaked(correct))
        } else {
            Ok(Distribution::uniform(self.vocabulary.len()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::kl;

    fn words(n: usize, tag: &str) -> Vec<String> {
        (0..n).map(|i| format!("{tag}{i}")).collect()
    }

    /// Five-token vocabulary: four targets plus EOS.
    fn lang(pi: Vec<usize>, eta: f64) -> (LagLanguage, SourceSequence) {
        let src = words(4, "s");
        let mut vocab_tokens = words(4, "t");
        vocab_tokens.push("</s>".into());
        let vocabulary = Vocabulary::with_eos(vocab_tokens, "</s>").unwrap();
        let emit = src.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        let lang = LagLanguage::new(LagLanguageSpec {
            vocabulary,
            source: src.clone(),
            pi,
            emit,
            eta,
        })
        .unwrap();
        (lang, SourceSequence::text(src).unwrap())
    }

    #[test]
    fn point_mass_when_source_available() {
        let (l, s) = lang(vec![1, 4, 4, 4], 0.0);
        let d = l.next_distribution(&s, 1, &[]).unwrap();
        assert_eq!(d.probs(), Distribution::point_mass(5, 0).probs());
    }

    #[test]
    fn uniform_when_source_missing() {
        let (l, s) = lang(vec![1, 4, 4, 4], 0.0);
        let d = l.next_distribution(&s, 2, &[0]).unwrap();
        assert_eq!(d.probs(), &[0.2; 5]);
    }

    #[test]
    fn noisy_peak() {
        let (l, s) = lang(vec![1, 4, 4, 4], 0.1);
        let d = l.next_distribution(&s, 4, &[0]).unwrap();
        // 1 - 0.1 on the right token, 0.1 / 4 on each of the others
        for (id, p) in d.probs().iter().enumerate() {
            let want = if id == 3 { 0.9 } else { 0.025 };
            assert!((p - want).abs() < 1e-12, "{id}: {p}");
        }
    }

    #[test]
    fn eos_after_last_target_and_overrun() {
        let (l, s) = lang(vec![1, 2, 3, 4], 0.0);
        let d = l.next_distribution(&s, 4, &[0, 1, 2, 3]).unwrap();
        assert_eq!(d.probs()[4], 1.0);
        let d = l.next_distribution(&s, 3, &[0, 1, 2, 3]).unwrap();
        assert_eq!(d.probs(), &[0.2; 5]);
        assert_eq!(
            l.next_distribution(&s, 4, &[0, 1, 2, 3, 4]),
            Err(ProviderError::PrefixOverrun { len: 5, max: 4 })
        );
    }

    #[test]
    fn kl_jumps_once_needed_source_arrives() {
        let (l, s) = lang(vec![3, 4, 4, 4], 0.05);
        let base = l.next_distribution(&s, 1, &[]).unwrap();
        let before = kl(&l.next_distribution(&s, 2, &[]).unwrap(), &base).unwrap();
        let after = kl(&l.next_distribution(&s, 3, &[]).unwrap(), &base).unwrap();
        assert!(after > before);
    }

    #[test]
    fn from_parallel_checks_consistency() {
        let src = words(3, "s");
        let tgt = vec!["b".to_string(), "a".to_string(), "b".to_string()];
        let l = LagLanguage::from_parallel(&src, &tgt, &[2, 1, 2], 0.0, "</s>").unwrap();
        assert_eq!(l.vocabulary().tokens(), &["a", "b", "</s>"]);
        assert_eq!(l.targets(), &[1, 0, 1]);
        // s1 would have to emit both b and a
        assert!(LagLanguage::from_parallel(&src, &tgt, &[2, 2, 2], 0.0, "</s>").is_err());
        assert!(LagLanguage::from_parallel(&src, &tgt, &[2, 1, 4], 0.0, "</s>").is_err());
    }

    #[test]
    fn rejects_bad_specs() {
        let vocabulary = Vocabulary::with_eos(["a"], "</s>").unwrap();
        let spec = |pi: Vec<usize>, eta| LagLanguageSpec {
            vocabulary: vocabulary.clone(),
            source: vec!["x".into(), "y".into()],
            pi,
            emit: [("x".to_string(), 0), ("y".to_string(), 0)].into_iter().collect(),
            eta,
        };
        assert!(LagLanguage::new(spec(vec![1, 2], 0.0)).is_ok());
        assert!(LagLanguage::new(spec(vec![1, 3], 0.0)).is_err());
        assert!(LagLanguage::new(spec(vec![1], 0.0)).is_err());
        assert!(LagLanguage::new(spec(vec![1, 2], 0.5)).is_err());
    }
}
