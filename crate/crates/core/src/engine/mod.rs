//! The streaming decode loop.
//!
//! [`decode_stream`] interleaves READ and WRITE actions under the LSG rule.
//! [`decode_wait_k`] follows a fixed schedule and [`decode_offline`] reads
//! the whole source first; both exist as references for the streaming
//! policy and share its conditioning, so their outputs are directly
//! comparable.
//!
//! All three decode greedily. Each result carries the read count `g_i`
//! behind every emitted token, the per-consultation diagnostics, and a
//! wall-clock event log. [`simulate_clock`] replays that trace against a
//! simulated arrival schedule for computation-aware latency.

mod clock;

use std::borrow::Cow;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{argmax_token, max_prob, Distribution, TokenId};
use crate::params::{HyperParams, ParamError};
use crate::policy::{baseline_read_count, lsg_decide, range_bounds, wait_k_read_count, PolicyError};
use crate::provider::{Generator, ProviderError};
use crate::source::SourceSequence;
use crate::trace::{Action, PolicyTrace, StepRecord, Trigger};

pub use clock::{simulate_clock, ComputeModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeError {
    #[error("provider failed at step {step} with {read} source elements read: {source}")]
    Provider {
        step: usize,
        read: usize,
        #[source]
        source: ProviderError,
    },
    #[error("provider returned {got} probabilities for a vocabulary of {expected}")]
    VocabularyMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeLimits {
    pub max_target_len: usize,
    /// Longer sources are cut to this length and the result is flagged.
    pub max_source_len: usize,
    /// Keep EOS from being emitted before the whole source has been read.
    pub mask_early_eos: bool,
    /// Record per-consultation diagnostics in the trace.
    pub retain_diagnostics: bool,
}

impl Default for DecodeLimits {
    fn default() -> Self {
        Self {
            max_target_len: 256,
            max_source_len: 4096,
            mask_early_eos: true,
            retain_diagnostics: true,
        }
    }
}

impl DecodeLimits {
    pub fn with_max_target_len(mut self, n: usize) -> Self {
        self.max_target_len = n;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    SourceArrival {
        read: usize,
    },
    ProviderCall {
        read: usize,
        prefix_len: usize,
        duration_ms: f64,
    },
    Emission {
        step: usize,
        token: TokenId,
        read: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeEvent {
    pub wall_time_ms: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum PolicyKind {
    Lsg,
    WaitK { k: usize },
    Offline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub policy: PolicyKind,
    /// Emitted tokens, including a final EOS if one was produced.
    pub tokens: Vec<TokenId>,
    pub trace: PolicyTrace,
    pub events: Vec<DecodeEvent>,
    /// `ln p(y_i | x_<=g_i, y_<i)` for each emitted token.
    pub logprobs: Vec<f64>,
    /// Effective source length `J` after any clipping.
    pub source_len: usize,
    pub eos_id: TokenId,
    /// Set when the source was clipped or the target hit `max_target_len`.
    pub truncated: bool,
    /// Measured provider time per consultation (per emission for offline runs).
    pub step_compute_ms: Vec<f64>,
}

impl DecodeResult {
    pub fn ended_with_eos(&self) -> bool {
        self.tokens.last() == Some(&self.eos_id)
    }

    /// Emitted tokens without the trailing EOS.
    pub fn content_tokens(&self) -> &[TokenId] {
        &self.tokens[..self.content_len()]
    }

    /// `g` for the content tokens.
    pub fn content_g(&self) -> &[usize] {
        &self.trace.g[..self.content_len()]
    }

    pub fn content_len(&self) -> usize {
        self.tokens.len() - usize::from(self.ended_with_eos())
    }

    /// Log-probability of the whole output: the chain-rule sum of the
    /// per-step conditionals actually used.
    pub fn sequence_log_prob(&self) -> f64 {
        self.logprobs.iter().sum()
    }
}

/// Provider access for one decode: EOS masking, shape checks and event
/// recording live here so the three loops share them.
struct Session<'a, G: ?Sized> {
    provider: &'a G,
    source: &'a SourceSequence,
    vocab_size: usize,
    eos: TokenId,
    mask_early_eos: bool,
    start: Instant,
    events: Vec<DecodeEvent>,
}

impl<'a, G: Generator + ?Sized> Session<'a, G> {
    fn new(provider: &'a G, source: &'a SourceSequence, limits: &DecodeLimits) -> Self {
        let vocab = provider.vocabulary();
        Self {
            provider,
            source,
            vocab_size: vocab.len(),
            eos: vocab.eos_id(),
            mask_early_eos: limits.mask_early_eos,
            start: Instant::now(),
            events: Vec::new(),
        }
    }

    fn now_ms(&self) -> f64 {
        self.start.elapsed().as_secs_f64() * 1e3
    }

    fn push(&mut self, kind: EventKind) {
        let wall_time_ms = self.now_ms();
        self.events.push(DecodeEvent { wall_time_ms, kind });
    }

    fn arrive(&mut self, read: usize) {
        self.push(EventKind::SourceArrival { read });
    }

    /// The distribution the policy sees for `(read, prefix)`, and how long
    /// the provider took.
    fn view(&mut self, step: usize, read: usize, prefix: &[TokenId]) -> Result<(Distribution, f64), DecodeError> {
        let started = self.now_ms();
        let t0 = Instant::now();
        let dist = self
            .provider
            .next_distribution(self.source, read, prefix)
            .map_err(|source| DecodeError::Provider { step, read, source })?;
        let duration_ms = t0.elapsed().as_secs_f64() * 1e3;
        self.events.push(DecodeEvent {
            wall_time_ms: started,
            kind: EventKind::ProviderCall {
                read,
                prefix_len: prefix.len(),
                duration_ms,
            },
        });
        if dist.len() != self.vocab_size {
            return Err(DecodeError::VocabularyMismatch {
                expected: self.vocab_size,
                got: dist.len(),
            });
        }
        Ok((
            mask_early_eos(dist, read, self.source.len(), self.eos, self.mask_early_eos),
            duration_ms,
        ))
    }

    fn emit(&mut self, step: usize, token: TokenId, read: usize) {
        self.push(EventKind::Emission { step, token, read });
    }
}

fn mask_early_eos(dist: Distribution, read: usize, source_len: usize, eos: TokenId, enabled: bool) -> Distribution {
    if enabled && read < source_len {
        dist.without_token(eos)
    } else {
        dist
    }
}

/// The distribution the policy sees for `(read, prefix)`: the provider's
/// answer, with EOS masked out before the source is exhausted when
/// `limits.mask_early_eos` is set.
pub fn observed_distribution<G: Generator + ?Sized>(
    provider: &G,
    source: &SourceSequence,
    read: usize,
    prefix: &[TokenId],
    limits: &DecodeLimits,
) -> Result<Distribution, DecodeError> {
    let step = prefix.len() + 1;
    let dist = provider
        .next_distribution(source, read, prefix)
        .map_err(|source| DecodeError::Provider { step, read, source })?;
    let eos = provider.vocabulary().eos_id();
    Ok(mask_early_eos(dist, read, source.len(), eos, limits.mask_early_eos))
}

fn clip_source<'s>(source: &'s SourceSequence, limits: &DecodeLimits) -> (Cow<'s, SourceSequence>, bool) {
    if source.len() > limits.max_source_len {
        (Cow::Owned(source.truncated(limits.max_source_len)), true)
    } else {
        (Cow::Borrowed(source), false)
    }
}

fn token_logprob(dist: &Distribution, token: TokenId) -> f64 {
    dist.prob(token).ln()
}

/// Decodes `source` under the LSG policy.
///
/// For each target step `i` the read count starts where the previous step
/// left off (at least the lower range bound), and the policy is consulted
/// at each read count until it WRITEs. The baseline distribution is
/// fetched once per step, conditioned on `min(i, J)` source elements and
/// the same target prefix.
pub fn decode_stream<G: Generator + ?Sized>(
    provider: &G,
    source: &SourceSequence,
    hp: &HyperParams,
    limits: &DecodeLimits,
) -> Result<DecodeResult, DecodeError> {
    hp.validate()?;
    let (source, mut truncated) = clip_source(source, limits);
    let source = source.as_ref();
    let source_len = source.len();
    let mut session = Session::new(provider, source, limits);

    let mut tokens = Vec::new();
    let mut logprobs = Vec::new();
    let mut trace = PolicyTrace::default();
    let mut step_compute_ms = Vec::new();
    let mut read = 0;

    loop {
        if tokens.len() >= limits.max_target_len {
            truncated = true;
            break;
        }
        let step = tokens.len() + 1;
        let (lo, hi) = range_bounds(hp.pre_read, hp.autonomy, step, source_len);
        while read < lo {
            read += 1;
            session.arrive(read);
        }
        let base_read = baseline_read_count(step, source_len);
        let (baseline, mut pending_ms) = session.view(step, base_read, &tokens)?;

        let token = loop {
            let current = if read == base_read {
                baseline.clone()
            } else {
                let (d, ms) = session.view(step, read, &tokens)?;
                pending_ms += ms;
                d
            };
            let decision = lsg_decide(&current, &baseline, hp, read, source_len, lo, hi)?;
            step_compute_ms.push(std::mem::take(&mut pending_ms));
            if limits.retain_diagnostics {
                trace.steps.push(StepRecord {
                    step,
                    read,
                    action: decision.action,
                    kl: Some(decision.kl),
                    max_prob: decision.confidence,
                    trigger: decision.trigger,
                });
            }
            match decision.action {
                Action::Read => {
                    read += 1;
                    session.arrive(read);
                }
                Action::Write => {
                    let token = argmax_token(&current);
                    logprobs.push(token_logprob(&current, token));
                    break token;
                }
            }
        };
        session.emit(step, token, read);
        tokens.push(token);
        trace.g.push(read);
        if token == session.eos {
            break;
        }
    }

    Ok(DecodeResult {
        policy: PolicyKind::Lsg,
        tokens,
        trace,
        events: session.events,
        logprobs,
        source_len,
        eos_id: session.eos,
        truncated,
        step_compute_ms,
    })
}

/// Decodes on the fixed schedule `g_i = min(k + i - 1, J)`.
pub fn decode_wait_k<G: Generator + ?Sized>(
    provider: &G,
    source: &SourceSequence,
    k: usize,
    limits: &DecodeLimits,
) -> Result<DecodeResult, DecodeError> {
    if k == 0 {
        return Err(ParamError::Invalid {
            name: "k",
            reason: "must be at least 1".into(),
        }
        .into());
    }
    scheduled(provider, source, limits, PolicyKind::WaitK { k }, |step, len| {
        wait_k_read_count(k, step, len)
    })
}

/// Reads the whole source, then decodes greedily. The quality reference.
pub fn decode_offline<G: Generator + ?Sized>(
    provider: &G,
    source: &SourceSequence,
    limits: &DecodeLimits,
) -> Result<DecodeResult, DecodeError> {
    scheduled(provider, source, limits, PolicyKind::Offline, |_, len| len)
}

fn scheduled<G, F>(
    provider: &G,
    source: &SourceSequence,
    limits: &DecodeLimits,
    policy: PolicyKind,
    schedule: F,
) -> Result<DecodeResult, DecodeError>
where
    G: Generator + ?Sized,
    F: Fn(usize, usize) -> usize,
{
    let (source, mut truncated) = clip_source(source, limits);
    let source = source.as_ref();
    let source_len = source.len();
    let mut session = Session::new(provider, source, limits);
    let record_steps = limits.retain_diagnostics && policy != PolicyKind::Offline;

    let mut tokens = Vec::new();
    let mut logprobs = Vec::new();
    let mut trace = PolicyTrace::default();
    let mut step_compute_ms = Vec::new();
    let mut read = 0;

    loop {
        if tokens.len() >= limits.max_target_len {
            truncated = true;
            break;
        }
        let step = tokens.len() + 1;
        let target = schedule(step, source_len).max(read);
        while read < target {
            read += 1;
            session.arrive(read);
        }
        let (current, ms) = session.view(step, read, &tokens)?;
        step_compute_ms.push(ms);
        let token = argmax_token(&current);
        if record_steps {
            trace.steps.push(StepRecord {
                step,
                read,
                action: Action::Write,
                kl: None,
                max_prob: max_prob(&current),
                trigger: if read == source_len {
                    Trigger::SourceExhausted
                } else {
                    Trigger::ForcedUpperBound
                },
            });
        }
        logprobs.push(token_logprob(&current, token));
        session.emit(step, token, read);
        tokens.push(token);
        trace.g.push(read);
        if token == session.eos {
            break;
        }
    }

    Ok(DecodeResult {
        policy,
        tokens,
        trace,
        events: session.events,
        logprobs,
        source_len,
        eos_id: session.eos,
        truncated,
        step_compute_ms,
    })
}
