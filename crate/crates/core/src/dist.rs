//! Vocabularies and next-token probability distributions.
//!
//! Everything the READ/WRITE rule looks at is a [`Distribution`]: the
//! current one, conditioned on everything read so far, and the baseline
//! one, conditioned on the wait-1 prefix. The helpers here compare them
//! ([`kl_divergence`]) and read them ([`argmax_token`], [`max_prob`]).

use std::collections::HashMap;

use thiserror::Error;

/// Index into a [`Vocabulary`].
pub type TokenId = usize;

/// Default additive smoothing used by [`kl`].
pub const KL_EPS: f64 = 1e-10;

/// Tolerance on the total mass of a distribution.
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("support mismatch: {left} vs {right} entries")]
    SupportMismatch { left: usize, right: usize },
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
}

/// Ordered set of distinct token strings with a designated end-of-sequence token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
    eos_id: TokenId,
}

impl Vocabulary {
    pub fn new(tokens: Vec<String>, eos_id: TokenId) -> Result<Self, DistributionError> {
        if tokens.len() < 2 {
            return Err(DistributionError::InvalidVocabulary(format!(
                "need at least 2 tokens, got {}",
                tokens.len()
            )));
        }
        if eos_id >= tokens.len() {
            return Err(DistributionError::InvalidVocabulary(format!(
                "eos id {eos_id} out of range for {} tokens",
                tokens.len()
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (id, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), id).is_some() {
                return Err(DistributionError::InvalidVocabulary(format!("duplicate token {tok:?}")));
            }
        }
        Ok(Self { tokens, index, eos_id })
    }

    /// Builds a vocabulary from `tokens`, appending `eos` if it is not already present.
    pub fn with_eos<I, S>(tokens: I, eos: &str) -> Result<Self, DistributionError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut list: Vec<String> = tokens.into_iter().map(Into::into).collect();
        let eos_id = match list.iter().position(|t| t == eos) {
            Some(id) => id,
            None => {
                list.push(eos.to_string());
                list.len() - 1
            }
        };
        Self::new(list, eos_id)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn eos_id(&self) -> TokenId {
        self.eos_id
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Maps ids back to strings. Unknown ids render as `<unk:N>`.
    pub fn decode(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter()
            .map(|&id| match self.token(id) {
                Some(t) => t.to_string(),
                None => format!("<unk:{id}>"),
            })
            .collect()
    }
}

/// A probability vector over a vocabulary. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(weights: &[f64]) -> Result<Self, DistributionError> {
        make_distribution(weights)
    }

    pub fn uniform(size: usize) -> Self {
        assert!(size > 0, "uniform distribution over an empty support");
        Self {
            probs: vec![1.0 / size as f64; size],
        }
    }

    pub fn point_mass(size: usize, at: TokenId) -> Self {
        assert!(at < size, "point mass outside support");
        let mut probs = vec![0.0; size];
        probs[at] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, id: TokenId) -> f64 {
        self.probs.get(id).copied().unwrap_or(0.0)
    }

    /// Zeroes `token` and renormalizes. If `token` carried all the mass the
    /// result is uniform over the remaining entries.
    pub fn without_token(&self, token: TokenId) -> Self {
        let mut weights = self.probs.clone();
        if let Some(w) = weights.get_mut(token) {
            *w = 0.0;
        }
        match make_distribution(&weights) {
            Ok(d) => d,
            Err(_) => {
                let n = self.probs.len();
                let mut probs = vec![1.0 / (n - 1) as f64; n];
                probs[token] = 0.0;
                Self { probs }
            }
        }
    }
}

/// Divides each weight by the total.
pub fn make_distribution(weights: &[f64]) -> Result<Distribution, DistributionError> {
    if weights.is_empty() {
        return Err(DistributionError::InvalidDistribution("empty weight vector".into()));
    }
    if let Some(bad) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(DistributionError::InvalidDistribution(format!(
            "weight {bad} is negative or not finite"
        )));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(DistributionError::InvalidDistribution(format!(
            "weights sum to {total}"
        )));
    }
    Ok(Distribution {
        probs: weights.iter().map(|w| w / total).collect(),
    })
}

/// `Σ p(v)·ln((p(v)+eps)/(q(v)+eps))` in nats, clamped at zero.
pub fn kl_divergence(p: &Distribution, q: &Distribution, eps: f64) -> Result<f64, DistributionError> {
    if p.len() != q.len() {
        return Err(DistributionError::SupportMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let raw: f64 = p
        .probs
        .iter()
        .zip(&q.probs)
        .filter(|(pv, _)| **pv > 0.0)
        .map(|(pv, qv)| pv * ((pv + eps) / (qv + eps)).ln())
        .sum();
    Ok(raw.max(0.0))
}

/// [`kl_divergence`] with [`KL_EPS`] smoothing.
pub fn kl(p: &Distribution, q: &Distribution) -> Result<f64, DistributionError> {
    kl_divergence(p, q, KL_EPS)
}

/// Greedy choice; ties go to the lowest index.
pub fn argmax_token(p: &Distribution) -> TokenId {
    let mut best = 0;
    for (id, &v) in p.probs.iter().enumerate().skip(1) {
        if v > p.probs[best] {
            best = id;
        }
    }
    best
}

pub fn max_prob(p: &Distribution) -> f64 {
    p.probs.iter().copied().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(w: &[f64]) -> Distribution {
        make_distribution(w).unwrap()
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(d(&[2.0, 2.0]).probs(), &[0.5, 0.5]);
        assert_eq!(d(&[1.0, 0.0, 0.0, 0.0]).probs(), &[1.0, 0.0, 0.0, 0.0]);
        // 3 / (3 + 1), 1 / (3 + 1)
        assert_eq!(d(&[3.0, 1.0]).probs(), &[0.75, 0.25]);
    }

    #[test]
    fn rejects_bad_weights() {
        for w in [&[0.0, 0.0][..], &[1.0, -0.5], &[], &[f64::NAN, 1.0], &[f64::INFINITY]] {
            assert!(matches!(
                make_distribution(w),
                Err(DistributionError::InvalidDistribution(_))
            ));
        }
    }

    #[test]
    fn kl_examples() {
        let half = d(&[0.5, 0.5]);
        assert_eq!(kl(&half, &half).unwrap(), 0.0);

        // 0.9 ln(0.9/0.5) + 0.1 ln(0.1/0.5), summed by hand
        let expected = 0.9 * (1.8f64).ln() + 0.1 * (0.2f64).ln();
        let got = kl(&d(&[0.9, 0.1]), &half).unwrap();
        assert!((got - expected).abs() < 1e-9);
        assert!((got - 0.3681).abs() < 1e-4);

        let got = kl_divergence(&d(&[1.0, 0.0]), &d(&[0.0, 1.0]), 1e-10).unwrap();
        assert!(got.is_finite());
        assert!((got - (1e10f64).ln()).abs() < 1e-6);
    }

    #[test]
    fn kl_support_mismatch() {
        let err = kl(&Distribution::uniform(2), &Distribution::uniform(3)).unwrap_err();
        assert_eq!(err, DistributionError::SupportMismatch { left: 2, right: 3 });
    }

    #[test]
    fn argmax_and_max_prob() {
        assert_eq!(argmax_token(&d(&[0.1, 0.7, 0.2])), 1);
        assert_eq!(argmax_token(&d(&[0.5, 0.5])), 0);
        assert_eq!(argmax_token(&d(&[0.2, 0.3, 0.3, 0.2])), 1);
        assert_eq!(max_prob(&d(&[0.1, 0.7, 0.2])), 0.7);
        assert_eq!(max_prob(&Distribution::uniform(4)), 0.25);
        assert_eq!(max_prob(&d(&[1.0, 0.0])), 1.0);
    }

    #[test]
    fn without_token_renormalizes_or_falls_back() {
        let masked = d(&[0.5, 0.25, 0.25]).without_token(0);
        assert_eq!(masked.probs(), &[0.0, 0.5, 0.5]);
        let fallback = Distribution::point_mass(3, 2).without_token(2);
        assert_eq!(fallback.probs(), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn vocabulary_validation() {
        assert!(Vocabulary::new(vec!["a".into()], 0).is_err());
        assert!(Vocabulary::new(vec!["a".into(), "a".into()], 0).is_err());
        assert!(Vocabulary::new(vec!["a".into(), "b".into()], 2).is_err());
        let v = Vocabulary::with_eos(["a", "b"], "</s>").unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v.eos_id(), 2);
        assert_eq!(v.id("b"), Some(1));
        assert_eq!(v.decode(&[1, 2, 9]), vec!["b", "</s>", "<unk:9>"]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn weights() -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(0.0f64..100.0, 1..12).prop_filter("some mass", |w| w.iter().any(|x| *x > 0.0))
        }

        proptest! {
            #[test]
            fn normalized_output_is_valid(w in weights()) {
                let p = make_distribution(&w).unwrap();
                prop_assert!(p.probs().iter().all(|v| *v >= 0.0));
                prop_assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < MASS_TOLERANCE);
            }

            #[test]
            fn kl_self_is_zero(w in weights()) {
                let p = make_distribution(&w).unwrap();
                prop_assert!(kl(&p, &p).unwrap().abs() < 1e-9);
            }

            #[test]
            fn kl_non_negative(pair in (2usize..10).prop_flat_map(|n| (
                prop::collection::vec(0.001f64..10.0, n),
                prop::collection::vec(0.0f64..10.0, n),
            )).prop_filter("some mass", |(_, q)| q.iter().any(|x| *x > 0.0))) {
                let p = make_distribution(&pair.0).unwrap();
                let q = make_distribution(&pair.1).unwrap();
                // unclamped sum stays within numeric slack of zero
                let raw: f64 = p.probs().iter().zip(q.probs())
                    .map(|(a, b)| a * ((a + KL_EPS) / (b + KL_EPS)).ln())
                    .sum();
                prop_assert!(raw >= -1e-9);
                prop_assert!(kl(&p, &q).unwrap() >= 0.0);
            }

            #[test]
            fn argmax_scale_invariant(w in weights(), scale in 0.001f64..1000.0) {
                let scaled: Vec<f64> = w.iter().map(|x| x * scale).collect();
                prop_assert_eq!(
                    argmax_token(&make_distribution(&w).unwrap()),
                    argmax_token(&make_distribution(&scaled).unwrap())
                );
            }
        }
    }
}
