//! Divergence diagnostics: per-consultation traces and full heat maps.

use serde::Serialize;

use super::config::ExperimentConfig;
use super::corpus::Sample;
use super::experiment::{decode_with, ProviderContext};
use super::HarnessError;
use crate::dist::kl;
use crate::engine::{observed_distribution, DecodeLimits, DecodeResult, PolicyKind};
use crate::policy::baseline_read_count;
use crate::provider::Generator;
use crate::source::SourceSequence;
use crate::trace::{Action, Trigger};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KlRow {
    pub step: usize,
    pub read: usize,
    pub kl: Option<f64>,
    pub max_prob: f64,
    pub action: Action,
    pub trigger: Trigger,
}

/// One row per provider consultation the policy made. Offline decodes
/// made no decisions and give an empty table.
pub fn export_kl_trace(result: &DecodeResult) -> Result<Vec<KlRow>, HarnessError> {
    if result.policy == PolicyKind::Offline {
        return Ok(vec![]);
    }
    if result.trace.steps.is_empty() && !result.tokens.is_empty() {
        return Err(HarnessError::MissingDiagnostics);
    }
    Ok(result
        .trace
        .steps
        .iter()
        .map(|s| KlRow {
            step: s.step,
            read: s.read,
            kl: s.kl,
            max_prob: s.max_prob,
            action: s.action,
            trigger: s.trigger,
        })
        .collect())
}

pub fn kl_trace_tsv(rows: &[KlRow]) -> String {
    let mut out = String::from("step\tread\tkl\tmax_prob\taction\ttrigger\n");
    for r in rows {
        let kl = r.kl.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"));
        let action = match r.action {
            Action::Read => "READ",
            Action::Write => "WRITE",
        };
        out.push_str(&format!(
            "{}\t{}\t{kl}\t{:.6}\t{action}\t{}\n",
            r.step,
            r.read,
            r.max_prob,
            r.trigger.as_str()
        ));
    }
    out
}

/// `heat[i][j - 1]`: divergence of the distribution for token `i + 1`
/// given `j` source elements from its wait-1 baseline, along the prefix
/// the decode actually produced. Covers every `j`, not just the ones the
/// policy visited.
pub fn kl_heatmap<G: Generator + ?Sized>(
    provider: &G,
    source: &SourceSequence,
    result: &DecodeResult,
    limits: &DecodeLimits,
) -> Result<Vec<Vec<f64>>, HarnessError> {
    let source_len = result.source_len.min(source.len());
    let source = source.truncated(source_len);
    let mut heat = Vec::with_capacity(result.tokens.len());
    for i in 0..result.tokens.len() {
        let prefix = &result.tokens[..i];
        let base = observed_distribution(
            provider,
            &source,
            baseline_read_count(i + 1, source_len),
            prefix,
            limits,
        )?;
        let row = (1..=source_len)
            .map(|j| {
                let cur = observed_distribution(provider, &source, j, prefix, limits)?;
                Ok(kl(&cur, &base).map_err(crate::provider::ProviderError::from)?)
            })
            .collect::<Result<Vec<f64>, HarnessError>>()?;
        heat.push(row);
    }
    Ok(heat)
}

/// Decodes sample `id` as a full run would and returns its heat map.
pub fn sample_heatmap(config: &ExperimentConfig, samples: &[Sample], id: &str) -> Result<Vec<Vec<f64>>, HarnessError> {
    let sample = samples
        .iter()
        .find(|s| s.id == id)
        .ok_or_else(|| HarnessError::UnknownSample(id.to_string()))?;
    let ctx = ProviderContext::new(&config.provider, samples)?;
    let (result, _) = decode_with(&ctx, config, sample)?;
    ctx.with_generator(sample, |g| kl_heatmap(g, &sample.source, &result, &config.limits))?
}
