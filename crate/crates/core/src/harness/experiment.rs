use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, PolicySpec, ProviderSpec};
use super::corpus::{load_corpus, Sample};
use super::sweep::{SweepRow, SweepTable};
use super::HarnessError;
use crate::dist::Vocabulary;
use crate::engine::{
    decode_offline, decode_stream, decode_wait_k, simulate_clock, ComputeModel, DecodeEvent, DecodeResult, EventKind,
};
use crate::metrics::{
    average_lagging_speech, average_lagging_text, computation_aware_al, corpus_bleu, corpus_wer, merge_subwords,
    sufficiency_rate, word_error_rate, MetricReport,
};
use crate::provider::{ExternalProvider, Generator, LagLanguage, TableProvider};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleStatus {
    Ok,
    Error,
}

/// One line of the per-sample report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub status: SampleStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub source_len: usize,
    pub hypothesis: Vec<String>,
    /// Read count behind each hypothesis word.
    pub g: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricReport>,
    pub triggers: BTreeMap<String, usize>,
    pub truncated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl SampleRecord {
    fn failed(sample: &Sample, error: String) -> Self {
        Self {
            id: sample.id.clone(),
            status: SampleStatus::Error,
            error: Some(error),
            source_len: sample.source.len(),
            hypothesis: vec![],
            g: vec![],
            metrics: None,
            triggers: BTreeMap::new(),
            truncated: false,
            note: None,
        }
    }
}

/// Corpus-level numbers over the samples that decoded successfully.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n_samples: usize,
    pub n_ok: usize,
    pub n_err: usize,
    pub mean_al: Option<f64>,
    pub mean_al_ca: Option<f64>,
    pub bleu: Option<f64>,
    pub wer: Option<f64>,
    /// Pooled over all aligned words, not averaged per sample.
    pub sufficiency: Option<f64>,
}

/// Wall-clock measurements, kept apart from the deterministic report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RuntimeStats {
    pub total_ms: f64,
    pub per_sample_ms: BTreeMap<String, f64>,
    /// Computation-aware lagging using measured provider time (speech only).
    pub measured_al_ca: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// Sorted by sample id.
    pub samples: Vec<SampleRecord>,
    pub aggregate: Aggregate,
    pub runtime: RuntimeStats,
}

impl ExperimentReport {
    pub fn has_errors(&self) -> bool {
        self.aggregate.n_err > 0
    }

    pub fn samples_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            out.push_str(&serde_json::to_string(s).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn summary_tsv(&self) -> String {
        SweepTable {
            rows: vec![SweepRow::from_report(self)],
        }
        .to_tsv()
    }

    /// Writes `<prefix>.samples.jsonl`, `<prefix>.summary.tsv` and
    /// `<prefix>.runtime.json`. Only the last holds wall-clock values.
    pub fn write(&self, prefix: &Path) -> Result<(), HarnessError> {
        if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        }
        let with_ext = |ext: &str| {
            let mut p = prefix.as_os_str().to_owned();
            p.push(ext);
            std::path::PathBuf::from(p)
        };
        let write = |ext: &str, body: String| {
            let path = with_ext(ext);
            std::fs::write(&path, body).map_err(|e| HarnessError::io(&path, e))
        };
        write(".samples.jsonl", self.samples_jsonl())?;
        write(".summary.tsv", self.summary_tsv())?;
        write(
            ".runtime.json",
            serde_json::to_string_pretty(&self.runtime).expect("runtime serializes") + "\n",
        )
    }
}

const LAG_EOS: &str = "</s>";

/// Provider state shared across the samples of one run.
pub(crate) enum ProviderContext {
    /// One lag language per sample over the corpus-wide target vocabulary.
    Lag(f64, Vocabulary),
    Table(TableProvider),
    External(ExternalProvider),
}

impl ProviderContext {
    pub(crate) fn new(spec: &ProviderSpec, samples: &[Sample]) -> Result<Self, HarnessError> {
        Ok(match spec {
            ProviderSpec::Lag { eta } => {
                let mut words: Vec<&str> = samples
                    .iter()
                    .flat_map(|s| s.reference.iter().map(String::as_str))
                    .collect();
                words.sort_unstable();
                words.dedup();
                let vocabulary = Vocabulary::with_eos(words, LAG_EOS).map_err(crate::provider::ProviderError::from)?;
                ProviderContext::Lag(*eta, vocabulary)
            }
            ProviderSpec::Table { path } => ProviderContext::Table(TableProvider::load(path)?),
            ProviderSpec::External { config, vocab, eos } => {
                let text = std::fs::read_to_string(vocab).map_err(|e| HarnessError::io(vocab, e))?;
                let tokens = text.lines().map(str::trim).filter(|l| !l.is_empty());
                let vocabulary = Vocabulary::with_eos(tokens, eos).map_err(crate::provider::ProviderError::from)?;
                ProviderContext::External(ExternalProvider::connect(vocabulary, config.clone())?)
            }
        })
    }

    fn is_serial(&self) -> bool {
        matches!(self, ProviderContext::External(_))
    }

    pub(crate) fn with_generator<R>(
        &self,
        sample: &Sample,
        f: impl FnOnce(&dyn Generator) -> R,
    ) -> Result<R, HarnessError> {
        match self {
            ProviderContext::Lag(eta, vocabulary) => {
                let alignment = sample.alignment.as_ref().ok_or_else(|| {
                    HarnessError::Config("the lag provider needs an alignment for every sample".into())
                })?;
                // unaligned words need no source beyond the first element
                let pi: Vec<usize> = alignment.as_slice().iter().map(|&a| a.max(1)).collect();
                let lang = LagLanguage::from_parallel_in(
                    vocabulary.clone(),
                    sample.source.elements(),
                    &sample.reference,
                    &pi,
                    *eta,
                )?;
                Ok(f(&lang))
            }
            ProviderContext::Table(t) => Ok(f(t)),
            ProviderContext::External(e) => Ok(f(e)),
        }
    }
}

/// Decodes the sample `id` of `samples` exactly as a full run would.
/// Returns the result and the vocabulary it is expressed in.
pub fn decode_sample(
    config: &ExperimentConfig,
    samples: &[Sample],
    id: &str,
) -> Result<(DecodeResult, Vocabulary), HarnessError> {
    let sample = samples
        .iter()
        .find(|s| s.id == id)
        .ok_or_else(|| HarnessError::UnknownSample(id.to_string()))?;
    let ctx = ProviderContext::new(&config.provider, samples)?;
    decode_with(&ctx, config, sample)
}

pub(crate) fn decode_with(
    ctx: &ProviderContext,
    config: &ExperimentConfig,
    sample: &Sample,
) -> Result<(DecodeResult, Vocabulary), HarnessError> {
    ctx.with_generator(sample, |g| {
        let result = match config.policy {
            PolicySpec::Lsg => decode_stream(g, &sample.source, &config.hp, &config.limits),
            PolicySpec::WaitK => decode_wait_k(g, &sample.source, config.hp.k, &config.limits),
            PolicySpec::Offline => decode_offline(g, &sample.source, &config.limits),
        }?;
        Ok::<_, HarnessError>((result, g.vocabulary().clone()))
    })?
}

/// Indices of the tokens that end a word.
fn word_final_tokens(tokens: &[String], marker: &str) -> Vec<usize> {
    let mut ends: Vec<usize> = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| marker.is_empty() || !t.ends_with(marker))
        .map(|(i, _)| i)
        .collect();
    if !tokens.is_empty() && ends.last() != Some(&(tokens.len() - 1)) {
        ends.push(tokens.len() - 1);
    }
    ends
}

/// Renumbers emission events so that word `w` is emitted when its last
/// piece is.
fn word_level_events(events: &[DecodeEvent], ends: &[usize]) -> Vec<DecodeEvent> {
    let word_of: BTreeMap<usize, usize> = ends.iter().enumerate().map(|(w, &t)| (t + 1, w + 1)).collect();
    events
        .iter()
        .filter_map(|e| match e.kind {
            EventKind::Emission { step, token, read } => word_of.get(&step).map(|&w| DecodeEvent {
                wall_time_ms: e.wall_time_ms,
                kind: EventKind::Emission { step: w, token, read },
            }),
            _ => None,
        })
        .collect()
}

type WordPair = (Vec<String>, Vec<String>);

struct Evaluated {
    record: SampleRecord,
    words: Vec<String>,
    measured_al_ca: Option<f64>,
    /// Satisfied and total alignment checks, for the token-level rate.
    sufficient: Option<(usize, usize)>,
}

fn evaluate(
    config: &ExperimentConfig,
    sample: &Sample,
    result: &DecodeResult,
    vocab: &Vocabulary,
) -> Result<Evaluated, HarnessError> {
    let marker = config.subword_marker.as_str();
    let pieces = vocab.decode(result.content_tokens());
    let (words, delays) = merge_subwords(&pieces, result.content_g(), marker);
    let source_len = result.source_len;

    let al = match sample.source.segment_ms() {
        Some(ms) => average_lagging_speech(&delays, f64::from(ms), source_len)?,
        None => average_lagging_text(&delays, source_len)?,
    };
    let ends = word_final_tokens(&pieces, marker);
    let ca = |model: ComputeModel| -> Result<Option<f64>, HarnessError> {
        let Some(ms) = sample.source.segment_ms() else {
            return Ok(None);
        };
        let events = simulate_clock(result, &sample.source, &model, config.text_interval_ms);
        let words_events = word_level_events(&events, &ends);
        Ok(Some(computation_aware_al(
            &words_events,
            source_len,
            f64::from(ms),
            words.len(),
        )?))
    };
    let al_ca = match config.clock {
        Some(c) => ca(ComputeModel::Constant(c.compute_ms))?,
        None => None,
    };
    let measured_al_ca = ca(ComputeModel::Measured)?;

    let mut note = None;
    let sufficiency = match &sample.alignment {
        Some(a) if a.len() == delays.len() => Some(sufficiency_rate(a, &delays)?),
        Some(a) => {
            note = Some(format!(
                "sufficiency skipped: {} alignment entries for {} hypothesis words",
                a.len(),
                delays.len()
            ));
            None
        }
        None => None,
    };
    let sufficient = sample.alignment.as_ref().filter(|_| sufficiency.is_some()).map(|a| {
        (
            a.as_slice().iter().zip(&delays).filter(|(ai, gi)| ai <= gi).count(),
            delays.len(),
        )
    });
    let metrics = MetricReport {
        al,
        al_ca,
        bleu: corpus_bleu(std::slice::from_ref(&sample.reference), std::slice::from_ref(&words), 4)?,
        wer: word_error_rate(&sample.reference, &words)?,
        sufficiency,
    };
    let triggers = result
        .trace
        .trigger_histogram()
        .into_iter()
        .map(|(t, n)| (t.as_str().to_string(), n))
        .collect();
    Ok(Evaluated {
        record: SampleRecord {
            id: sample.id.clone(),
            status: SampleStatus::Ok,
            error: None,
            source_len,
            hypothesis: words.clone(),
            g: delays,
            metrics: Some(metrics),
            triggers,
            truncated: result.truncated,
            note,
        },
        words,
        measured_al_ca,
        sufficient,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Decodes and scores `samples` under `config` without touching the
/// filesystem beyond what the provider needs.
pub fn run_on_corpus(config: &ExperimentConfig, samples: &[Sample]) -> Result<ExperimentReport, HarnessError> {
    let started = Instant::now();
    let ctx = ProviderContext::new(&config.provider, samples)?;
    let workers = if ctx.is_serial() { 1 } else { config.workers };

    let run_one = |sample: &Sample| -> (Result<Evaluated, String>, f64) {
        let t0 = Instant::now();
        let out = decode_with(&ctx, config, sample)
            .and_then(|(result, vocab)| evaluate(config, sample, &result, &vocab))
            .map_err(|e| e.to_string());
        (out, t0.elapsed().as_secs_f64() * 1e3)
    };
    let outcomes: Vec<(Result<Evaluated, String>, f64)> = if workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;
        pool.install(|| samples.par_iter().map(run_one).collect())
    } else {
        samples.iter().map(run_one).collect()
    };

    let mut runtime = RuntimeStats::default();
    // record, plus (reference, hypothesis) words when it decoded
    let mut rows: Vec<(SampleRecord, Option<WordPair>)> = Vec::with_capacity(samples.len());
    let (mut hits, mut checked) = (0usize, 0usize);
    for (sample, (outcome, ms)) in samples.iter().zip(outcomes) {
        runtime.per_sample_ms.insert(sample.id.clone(), ms);
        match outcome {
            Ok(ev) => {
                if let Some(m) = ev.measured_al_ca {
                    runtime.measured_al_ca.insert(sample.id.clone(), m);
                }
                if let Some((h, n)) = ev.sufficient {
                    hits += h;
                    checked += n;
                }
                rows.push((ev.record, Some((sample.reference.clone(), ev.words))));
            }
            Err(e) => rows.push((SampleRecord::failed(sample, e), None)),
        }
    }
    rows.sort_by(|a, b| a.0.id.cmp(&b.0.id));

    let (refs, hyps): (Vec<Vec<String>>, Vec<Vec<String>>) = rows.iter().filter_map(|(_, p)| p.clone()).unzip();
    let metrics: Vec<&MetricReport> = rows.iter().filter_map(|(r, _)| r.metrics.as_ref()).collect();
    let n_ok = refs.len();
    let aggregate = Aggregate {
        n_samples: rows.len(),
        n_ok,
        n_err: rows.len() - n_ok,
        mean_al: mean(metrics.iter().map(|m| m.al)),
        mean_al_ca: mean(metrics.iter().filter_map(|m| m.al_ca)),
        bleu: if n_ok > 0 {
            Some(corpus_bleu(&refs, &hyps, 4)?)
        } else {
            None
        },
        wer: if n_ok > 0 {
            Some(corpus_wer(&refs, &hyps)?)
        } else {
            None
        },
        sufficiency: (checked > 0).then(|| hits as f64 / checked as f64),
    };
    runtime.total_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(ExperimentReport {
        config: config.clone(),
        samples: rows.into_iter().map(|(r, _)| r).collect(),
        aggregate,
        runtime,
    })
}

/// Loads the corpus, runs it, and writes the report files if a report
/// path is configured. A missing corpus fails before anything is written.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    let samples = load_corpus(&config.corpus)?;
    let report = run_on_corpus(config, &samples)?;
    if let Some(prefix) = &config.report {
        report.write(prefix)?;
    }
    Ok(report)
}
