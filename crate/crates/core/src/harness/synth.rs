//! Synthetic lag-language corpora.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::corpus::Sample;
use crate::metrics::AlignmentSequence;
use crate::source::SourceSequence;

/// Generates `n` samples. Source words are drawn from a fixed pool, target
/// word `i` is `T` plus the source word at `alignment(i)`, and the
/// alignment is stored with the sample.
///
/// `alignment` receives the rng, the 1-based target index and the length,
/// and must return a position in `1..=len`.
pub fn lag_corpus<F>(n: usize, seed: u64, lengths: std::ops::RangeInclusive<usize>, mut alignment: F) -> Vec<Sample>
where
    F: FnMut(&mut ChaCha8Rng, usize, usize) -> usize,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|idx| {
            let len = rng.gen_range(lengths.clone());
            let source: Vec<String> = (0..len).map(|_| format!("w{}", rng.gen_range(0..50))).collect();
            let pi: Vec<usize> = (1..=len).map(|i| alignment(&mut rng, i, len).clamp(1, len)).collect();
            let reference = pi.iter().map(|&p| format!("T{}", source[p - 1])).collect();
            Sample {
                id: format!("s{idx:05}"),
                source: SourceSequence::text(source).expect("non-empty"),
                reference,
                alignment: Some(AlignmentSequence::new(pi, len).expect("in range")),
            }
        })
        .collect()
}

/// `pi(i) = min(i + shift, len)`.
pub fn shifted(shift: usize) -> impl FnMut(&mut ChaCha8Rng, usize, usize) -> usize {
    move |_, i, len| (i + shift).min(len)
}

/// Each token independently needs `i + d` with `d` uniform in `back..=ahead`.
pub fn jittered(back: usize, ahead: usize) -> impl FnMut(&mut ChaCha8Rng, usize, usize) -> usize {
    move |rng, i, len| {
        let lo = i.saturating_sub(back).max(1);
        rng.gen_range(lo..=i + ahead).min(len)
    }
}

/// Half the tokens are covered by the wait-1 prefix (`pi(i) = i`), the
/// other half need `ahead` more elements.
pub fn half_sufficient(ahead: usize) -> impl FnMut(&mut ChaCha8Rng, usize, usize) -> usize {
    move |rng, i, len| {
        if rng.gen_bool(0.5) {
            i
        } else {
            (i + ahead).min(len)
        }
    }
}
