//! READ/WRITE decision rules.
//!
//! Everything here is a pure function of its arguments. Step indices `i`
//! and read counts `j` are 1-based, matching the trace.

use thiserror::Error;

use crate::dist::{kl, max_prob, Distribution, DistributionError};
use crate::params::HyperParams;
use crate::trace::{Action, Trigger};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("read count {read} outside the allowed range [{lo}, {hi}]")]
    RangeViolation { read: usize, lo: usize, hi: usize },
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// Source elements read before emitting token `i` under wait-k:
/// `min(k + i - 1, J)`.
pub fn wait_k_read_count(k: usize, step: usize, source_len: usize) -> usize {
    (k + step).saturating_sub(1).min(source_len)
}

/// Allowed read counts for token `i`:
/// `[min(L + i - 1, J), min(L + i - 1 + U, J)]`.
pub fn range_bounds(pre_read: usize, autonomy: usize, step: usize, source_len: usize) -> (usize, usize) {
    let base = (pre_read + step).saturating_sub(1);
    (base.min(source_len), (base + autonomy).min(source_len))
}

/// Read count the baseline distribution is conditioned on: the wait-1
/// prefix, `min(i, J)`.
pub fn baseline_read_count(step: usize, source_len: usize) -> usize {
    step.min(source_len)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub action: Action,
    pub trigger: Trigger,
    /// `KL(current || baseline)` in nats.
    pub kl: f64,
    /// Maximum probability of the current distribution.
    pub confidence: f64,
}

/// The LSG rule.
///
/// WRITE when the whole source is read, when `read` sits on the upper
/// bound, when the current distribution has drifted more than `delta` nats
/// from the baseline, or when its top probability exceeds `alpha`; checked
/// in that order. Otherwise READ.
pub fn lsg_decide(
    current: &Distribution,
    baseline: &Distribution,
    hp: &HyperParams,
    read: usize,
    source_len: usize,
    lo: usize,
    hi: usize,
) -> Result<Decision, PolicyError> {
    if read < lo || read > hi {
        return Err(PolicyError::RangeViolation { read, lo, hi });
    }
    let divergence = kl(current, baseline)?;
    let confidence = max_prob(current);
    let trigger = if read >= source_len {
        Trigger::SourceExhausted
    } else if read == hi {
        Trigger::ForcedUpperBound
    } else if divergence > hp.delta {
        Trigger::Kl
    } else if confidence > hp.alpha {
        Trigger::Confidence
    } else {
        Trigger::AwaitingInput
    };
    let action = if trigger == Trigger::AwaitingInput {
        Action::Read
    } else {
        Action::Write
    };
    Ok(Decision {
        action,
        trigger,
        kl: divergence,
        confidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::make_distribution;
    use proptest::prelude::*;

    fn d(w: &[f64]) -> Distribution {
        make_distribution(w).unwrap()
    }

    fn hp(delta: f64, alpha: f64) -> HyperParams {
        HyperParams::default().with_thresholds(delta, alpha)
    }

    #[test]
    fn wait_k_examples() {
        assert_eq!(wait_k_read_count(1, 1, 5), 1);
        assert_eq!(wait_k_read_count(3, 4, 10), 6);
        assert_eq!(wait_k_read_count(5, 9, 10), 10);
    }

    #[test]
    fn range_examples() {
        assert_eq!(range_bounds(3, 4, 2, 10), (4, 8));
        assert_eq!(range_bounds(1, 4, 1, 3), (1, 3));
        assert_eq!(range_bounds(7, 6, 5, 8), (8, 8));
    }

    #[test]
    fn kl_trigger() {
        let dec = lsg_decide(&d(&[0.9, 0.1]), &d(&[0.5, 0.5]), &hp(0.3, 0.9), 2, 10, 1, 5).unwrap();
        assert_eq!((dec.action, dec.trigger), (Action::Write, Trigger::Kl));
        let oracle = 0.9 * (0.9f64 / 0.5).ln() + 0.1 * (0.1f64 / 0.5).ln();
        assert!((dec.kl - oracle).abs() < 1e-9);
    }

    #[test]
    fn read_below_both_thresholds() {
        let dec = lsg_decide(&d(&[0.6, 0.4]), &d(&[0.55, 0.45]), &hp(0.3, 0.9), 2, 10, 1, 5).unwrap();
        assert_eq!((dec.action, dec.trigger), (Action::Read, Trigger::AwaitingInput));
        let oracle = 0.6 * (0.6f64 / 0.55).ln() + 0.4 * (0.4f64 / 0.45).ln();
        assert!((dec.kl - oracle).abs() < 1e-9);
        assert!((dec.kl - 0.0051).abs() < 1e-4);
        assert_eq!(dec.confidence, 0.6);
    }

    #[test]
    fn forced_and_exhausted() {
        let p = d(&[0.5, 0.5]);
        let dec = lsg_decide(&p, &p, &hp(1e9, 1.01), 5, 10, 1, 5).unwrap();
        assert_eq!(dec.trigger, Trigger::ForcedUpperBound);
        let dec = lsg_decide(&p, &p, &hp(1e9, 1.01), 10, 10, 6, 10).unwrap();
        assert_eq!(dec.trigger, Trigger::SourceExhausted);
        // exhaustion outranks the bound
        let dec = lsg_decide(&d(&[0.9, 0.1]), &p, &hp(0.0, 0.0), 10, 10, 10, 10).unwrap();
        assert_eq!(dec.trigger, Trigger::SourceExhausted);
    }

    #[test]
    fn confidence_trigger() {
        let dec = lsg_decide(&d(&[0.7, 0.3]), &d(&[0.7, 0.3]), &hp(1e9, 0.5), 2, 10, 1, 5).unwrap();
        assert_eq!((dec.action, dec.trigger), (Action::Write, Trigger::Confidence));
    }

    #[test]
    fn strict_inequalities() {
        // exactly at alpha does not fire
        let dec = lsg_decide(&d(&[0.5, 0.5]), &d(&[0.5, 0.5]), &hp(0.0, 0.5), 2, 10, 1, 5).unwrap();
        assert_eq!(dec.action, Action::Read);
    }

    #[test]
    fn range_violation() {
        let p = d(&[0.5, 0.5]);
        assert_eq!(
            lsg_decide(&p, &p, &hp(1.0, 1.0), 6, 10, 1, 5),
            Err(PolicyError::RangeViolation { read: 6, lo: 1, hi: 5 })
        );
        assert!(lsg_decide(&p, &p, &hp(1.0, 1.0), 0, 10, 1, 5).is_err());
    }

    #[test]
    fn wait_k_exhaustive_monotone() {
        for source_len in 1..=64 {
            for k in 0..=64 {
                let mut prev = 0;
                for step in 1..=80 {
                    let g = wait_k_read_count(k, step, source_len);
                    assert!(g >= prev && g <= source_len);
                    prev = g;
                }
            }
        }
    }

    fn dist2() -> impl Strategy<Value = Distribution> {
        (0.01f64..1.0).prop_map(|p| d(&[p, 1.0 - p]))
    }

    proptest! {
        #[test]
        fn range_bounds_ordered(l in 1usize..20, u in 0usize..20, i in 1usize..40, j in 1usize..40) {
            let (lo, hi) = range_bounds(l, u, i, j);
            prop_assert!(lo <= hi && hi <= j);
            prop_assert!(lo >= i.min(j) && i.min(j) >= 1);
        }

        #[test]
        fn monotone_in_delta(cur in dist2(), base in dist2(), a in 0.0f64..5.0, b in 0.0f64..5.0) {
            let (lo_d, hi_d) = if a <= b { (a, b) } else { (b, a) };
            let hi_dec = lsg_decide(&cur, &base, &hp(hi_d, 1.5), 2, 10, 1, 5).unwrap();
            let lo_dec = lsg_decide(&cur, &base, &hp(lo_d, 1.5), 2, 10, 1, 5).unwrap();
            if hi_dec.action == Action::Write {
                prop_assert_eq!(lo_dec.action, Action::Write);
            }
        }

        #[test]
        fn monotone_in_alpha(cur in dist2(), base in dist2(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo_a, hi_a) = if a <= b { (a, b) } else { (b, a) };
            let hi_dec = lsg_decide(&cur, &base, &hp(1e12, hi_a), 2, 10, 1, 5).unwrap();
            let lo_dec = lsg_decide(&cur, &base, &hp(1e12, lo_a), 2, 10, 1, 5).unwrap();
            if hi_dec.action == Action::Write {
                prop_assert_eq!(lo_dec.action, Action::Write);
            }
        }

        #[test]
        fn baseline_degeneracy(cur in dist2(), alpha in 0.0f64..1.0, delta in 0.0f64..3.0) {
            // same conditioning on both sides: only confidence can fire
            let dec = lsg_decide(&cur, &cur, &hp(delta, alpha), 2, 10, 1, 5).unwrap();
            prop_assert_eq!(dec.kl, 0.0);
            let want = if max_prob(&cur) > alpha { Trigger::Confidence } else { Trigger::AwaitingInput };
            prop_assert_eq!(dec.trigger, want);
        }
    }
}
