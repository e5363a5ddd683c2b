use super::MetricError;
use crate::engine::{DecodeEvent, EventKind};

/// `(1/τ) Σ_{i<=τ} (delay_i - (i-1)/r)`, where `τ` is the first step that
/// had the whole source and `r` is target length over source size.
fn lagging(
    delays: impl Fn(usize) -> f64,
    g: &[usize],
    source_len: usize,
    source_size: f64,
) -> Result<f64, MetricError> {
    if g.is_empty() {
        return Err(MetricError::EmptyHypothesis);
    }
    let hyp_len = g.len();
    let rate = hyp_len as f64 / source_size;
    let tau = g.iter().position(|&gi| gi >= source_len).map_or(hyp_len, |p| p + 1);
    let total: f64 = (1..=tau).map(|i| delays(i) - (i - 1) as f64 / rate).sum();
    Ok(total / tau as f64)
}

/// Average lagging in source words.
pub fn average_lagging_text(g: &[usize], source_len: usize) -> Result<f64, MetricError> {
    lagging(|i| g[i - 1] as f64, g, source_len, source_len as f64)
}

/// Average lagging in milliseconds for fixed-size speech segments.
pub fn average_lagging_speech(g: &[usize], segment_ms: f64, source_len: usize) -> Result<f64, MetricError> {
    let total_ms = source_len as f64 * segment_ms;
    lagging(
        |i| (g[i - 1] as f64 * segment_ms).min(total_ms),
        g,
        source_len,
        total_ms,
    )
}

/// Average lagging with each token's delay taken from its emission time in
/// `events`. `τ` still comes from the read counts, so this never falls
/// below [`average_lagging_speech`] for non-negative compute times.
pub fn computation_aware_al(
    events: &[DecodeEvent],
    source_len: usize,
    segment_ms: f64,
    hyp_len: usize,
) -> Result<f64, MetricError> {
    let mut emitted: Vec<Option<(f64, usize)>> = vec![None; hyp_len];
    for e in events {
        if let EventKind::Emission { step, read, .. } = e.kind {
            if (1..=hyp_len).contains(&step) && emitted[step - 1].is_none() {
                emitted[step - 1] = Some((e.wall_time_ms, read));
            }
        }
    }
    let emitted: Vec<(f64, usize)> = emitted
        .into_iter()
        .enumerate()
        .map(|(i, e)| e.ok_or_else(|| MetricError::MalformedTimeline(format!("no emission for step {}", i + 1))))
        .collect::<Result<_, _>>()?;
    let g: Vec<usize> = emitted.iter().map(|e| e.1).collect();
    lagging(|i| emitted[i - 1].0, &g, source_len, source_len as f64 * segment_ms)
}

/// Collapses subword tokens into whitespace words. A token ending in
/// `marker` continues into the next one; each word takes the read count of
/// its final piece.
pub fn merge_subwords(tokens: &[String], g: &[usize], marker: &str) -> (Vec<String>, Vec<usize>) {
    let mut words = Vec::new();
    let mut delays = Vec::new();
    let mut current = String::new();
    let mut last = 0;
    for (tok, &gi) in tokens.iter().zip(g) {
        last = gi;
        match tok.strip_suffix(marker) {
            Some(piece) if !marker.is_empty() => current.push_str(piece),
            _ => {
                current.push_str(tok);
                words.push(std::mem::take(&mut current));
                delays.push(gi);
            }
        }
    }
    if !current.is_empty() {
        words.push(current);
        delays.push(last);
    }
    (words, delays)
}
