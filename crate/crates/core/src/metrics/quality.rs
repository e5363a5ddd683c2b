use std::collections::HashMap;

use super::MetricError;

/// Levenshtein distance with unit substitution, insertion and deletion costs.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=a.len()).collect();
    let mut curr = vec![0; a.len() + 1];
    for (i, bt) in b.iter().enumerate() {
        curr[0] = i + 1;
        for (j, at) in a.iter().enumerate() {
            let sub = prev[j] + usize::from(at != bt);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[a.len()]
}

pub fn word_error_rate<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Result<f64, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    Ok(edit_distance(reference, hypothesis) as f64 / reference.len() as f64)
}

/// Total edits over total reference length.
pub fn corpus_wer<T: PartialEq>(references: &[Vec<T>], hypotheses: &[Vec<T>]) -> Result<f64, MetricError> {
    if references.len() != hypotheses.len() {
        return Err(MetricError::CorpusMismatch {
            references: references.len(),
            hypotheses: hypotheses.len(),
        });
    }
    let ref_len: usize = references.iter().map(Vec::len).sum();
    if ref_len == 0 {
        return Err(MetricError::EmptyReference);
    }
    let edits: usize = references
        .iter()
        .zip(hypotheses)
        .map(|(r, h)| edit_distance(r, h))
        .sum();
    Ok(edits as f64 / ref_len as f64)
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU over pre-tokenized text, in `[0, 100]`.
///
/// Clipped n-gram counts are pooled over the corpus. An order with no
/// hypothesis n-grams at all is left out of the geometric mean; an order
/// with n-grams but no matches makes the score 0. The brevity penalty is
/// `min(1, exp(1 - ref_len / hyp_len))`.
pub fn corpus_bleu<S: AsRef<str>>(
    references: &[Vec<S>],
    hypotheses: &[Vec<S>],
    max_n: usize,
) -> Result<f64, MetricError> {
    if references.len() != hypotheses.len() || references.is_empty() {
        return Err(MetricError::CorpusMismatch {
            references: references.len(),
            hypotheses: hypotheses.len(),
        });
    }
    let mut matches = vec![0usize; max_n];
    let mut totals = vec![0usize; max_n];
    let mut ref_len = 0;
    let mut hyp_len = 0;
    for (r, h) in references.iter().zip(hypotheses) {
        ref_len += r.len();
        hyp_len += h.len();
        for n in 1..=max_n {
            let ref_counts = ngram_counts(r, n);
            for (gram, count) in ngram_counts(h, n) {
                matches[n - 1] += count.min(ref_counts.get(&gram).copied().unwrap_or(0));
                totals[n - 1] += count;
            }
        }
    }
    if hyp_len == 0 {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    let mut orders = 0;
    for (&m, &t) in matches.iter().zip(&totals) {
        if t == 0 {
            continue;
        }
        if m == 0 {
            return Ok(0.0);
        }
        log_sum += (m as f64 / t as f64).ln();
        orders += 1;
    }
    if orders == 0 {
        return Ok(0.0);
    }
    let brevity = if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok(100.0 * brevity * (log_sum / orders as f64).exp())
}
