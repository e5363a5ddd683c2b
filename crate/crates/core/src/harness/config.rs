//! Experiment configuration.
//!
//! The on-disk form is a flat TOML table:
//!
//! ```toml
//! provider = "lag"
//! eta = 0.0
//! policy = "lsg"
//! preset = "fr-en"
//! delta = 0.5
//! L = 1
//! U = 4
//! corpus = "corpus.jsonl"
//! report = "out/run"
//! ```
//!
//! Relative paths are resolved against the config file's directory.
//! Explicit keys override the preset.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::engine::DecodeLimits;
use crate::params::HyperParams;
use crate::provider::{ExternalConfig, RestMassPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderSpec {
    /// Lag language built per sample from its reference and alignment.
    Lag {
        eta: f64,
    },
    Table {
        path: PathBuf,
    },
    External {
        #[serde(flatten)]
        config: ExternalConfig,
        vocab: PathBuf,
        eos: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySpec {
    Lsg,
    #[serde(rename = "waitk")]
    WaitK,
    Offline,
}

/// Settings for the simulated computation-aware clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockSpec {
    /// Injected cost per provider consultation.
    pub compute_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub provider: ProviderSpec,
    pub policy: PolicySpec,
    pub hp: HyperParams,
    pub limits: DecodeLimits,
    pub corpus: PathBuf,
    pub report: Option<PathBuf>,
    pub preset: Option<String>,
    pub workers: usize,
    pub clock: Option<ClockSpec>,
    /// Per-word arrival interval for text sources in the simulated clock.
    pub text_interval_ms: f64,
    /// Suffix marking a subword token that continues into the next one.
    pub subword_marker: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    provider: Option<String>,
    policy: Option<String>,
    preset: Option<String>,
    delta: Option<f64>,
    alpha: Option<f64>,
    #[serde(alias = "L")]
    pre_read: Option<usize>,
    #[serde(alias = "U")]
    autonomy: Option<usize>,
    k: Option<usize>,
    segment_ms: Option<u32>,
    max_target_len: Option<usize>,
    max_source_len: Option<usize>,
    mask_early_eos: Option<bool>,
    corpus: Option<PathBuf>,
    report: Option<PathBuf>,
    workers: Option<usize>,
    compute_ms: Option<f64>,
    text_interval_ms: Option<f64>,
    subword_marker: Option<String>,
    eta: Option<f64>,
    table: Option<PathBuf>,
    endpoint: Option<String>,
    timeout_ms: Option<u64>,
    top_k: Option<usize>,
    rest_mass: Option<RestMassPolicy>,
    vocab: Option<PathBuf>,
    eos: Option<String>,
}

fn required<T>(v: Option<T>, what: &str) -> Result<T, HarnessError> {
    v.ok_or_else(|| HarnessError::Config(format!("missing key {what:?}")))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, HarnessError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base_dir.join(p) };

        let policy = match required(file.policy, "policy")?.as_str() {
            "lsg" => PolicySpec::Lsg,
            "waitk" | "wait-k" | "wait_k" => PolicySpec::WaitK,
            "offline" => PolicySpec::Offline,
            other => return Err(HarnessError::Config(format!("unknown policy {other:?}"))),
        };

        let preset = match &file.preset {
            Some(name) => Some(HyperParams::preset(name)?),
            None => None,
        };
        let mut hp = preset.unwrap_or_default();
        let from_preset = preset.is_some();
        match (file.delta, file.alpha) {
            (Some(d), Some(a)) => hp = hp.with_thresholds(d, a),
            (d, a) => {
                if policy == PolicySpec::Lsg && !from_preset && (d.is_none() || a.is_none()) {
                    return Err(HarnessError::Config("lsg needs delta and alpha, or a preset".into()));
                }
                if let Some(d) = d {
                    hp.delta = d;
                }
                if let Some(a) = a {
                    hp.alpha = a;
                }
            }
        }
        match (file.pre_read, file.autonomy) {
            (Some(l), Some(u)) => hp = hp.with_range(l, u),
            (l, u) => {
                if policy == PolicySpec::Lsg && !from_preset && (l.is_none() || u.is_none()) {
                    return Err(HarnessError::Config("lsg needs L and U, or a preset".into()));
                }
                if let Some(l) = l {
                    hp.pre_read = l;
                }
                if let Some(u) = u {
                    hp.autonomy = u;
                }
            }
        }
        if policy == PolicySpec::WaitK && file.k.is_none() {
            return Err(HarnessError::Config("waitk needs k".into()));
        }
        if let Some(k) = file.k {
            hp.k = k;
        }
        if let Some(ms) = file.segment_ms {
            hp.segment_ms = ms;
        }
        hp.validate()?;

        let defaults = DecodeLimits::default();
        let limits = DecodeLimits {
            max_target_len: file.max_target_len.unwrap_or(defaults.max_target_len),
            max_source_len: file.max_source_len.unwrap_or(defaults.max_source_len),
            mask_early_eos: file.mask_early_eos.unwrap_or(defaults.mask_early_eos),
            retain_diagnostics: true,
        };
        if limits.max_target_len == 0 || limits.max_source_len == 0 {
            return Err(HarnessError::Config("limits must be positive".into()));
        }

        let provider = match required(file.provider, "provider")?.as_str() {
            "lag" => {
                let eta = file.eta.unwrap_or(0.0);
                if !(0.0..0.5).contains(&eta) {
                    return Err(HarnessError::Config(format!("eta {eta} outside [0, 0.5)")));
                }
                ProviderSpec::Lag { eta }
            }
            "table" => ProviderSpec::Table {
                path: resolve(required(file.table, "table")?),
            },
            "external" => {
                let config = ExternalConfig {
                    endpoint: required(file.endpoint, "endpoint")?,
                    timeout_ms: file.timeout_ms.unwrap_or(30_000),
                    top_k: file.top_k.unwrap_or(64),
                    rest_mass: file.rest_mass.unwrap_or_default(),
                };
                config.validate()?;
                ProviderSpec::External {
                    config,
                    vocab: resolve(required(file.vocab, "vocab")?),
                    eos: file.eos.unwrap_or_else(|| "</s>".into()),
                }
            }
            other => return Err(HarnessError::Config(format!("unknown provider {other:?}"))),
        };

        let workers = file.workers.unwrap_or(1);
        if workers == 0 {
            return Err(HarnessError::Config("workers must be at least 1".into()));
        }
        let clock = match file.compute_ms {
            Some(ms) if ms >= 0.0 && ms.is_finite() => Some(ClockSpec { compute_ms: ms }),
            Some(ms) => return Err(HarnessError::Config(format!("compute_ms {ms} must be non-negative"))),
            None => None,
        };

        Ok(Self {
            provider,
            policy,
            hp,
            limits,
            corpus: resolve(required(file.corpus, "corpus")?),
            report: file.report.map(resolve),
            preset: file.preset,
            workers,
            clock,
            text_interval_ms: file.text_interval_ms.unwrap_or(0.0),
            subword_marker: file.subword_marker.unwrap_or_else(|| "@@".into()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ExperimentConfig, HarnessError> {
        ExperimentConfig::from_toml_str(s, Path::new("/base"))
    }

    #[test]
    fn preset_then_overrides() {
        let c = parse("provider = \"lag\"\npolicy = \"lsg\"\npreset = \"fr-en\"\ncorpus = \"c.jsonl\"").unwrap();
        assert_eq!((c.hp.delta, c.hp.alpha, c.hp.segment_ms), (7.0, 0.5, 640));
        assert_eq!((c.hp.pre_read, c.hp.autonomy), (1, 4));
        assert_eq!(c.corpus, PathBuf::from("/base/c.jsonl"));

        let c = parse(
            "provider = \"lag\"\npolicy = \"lsg\"\npreset = \"de-en\"\ndelta = 0.5\nL = 3\nU = 4\ncorpus = \"/c\"",
        )
        .unwrap();
        assert_eq!((c.hp.delta, c.hp.alpha), (0.5, 0.6));
        assert_eq!((c.hp.pre_read, c.hp.autonomy), (3, 4));
        assert_eq!(c.corpus, PathBuf::from("/c"));
    }

    #[test]
    fn required_fields_per_policy() {
        assert!(parse("provider = \"lag\"\npolicy = \"lsg\"\ncorpus = \"c\"").is_err());
        assert!(parse("provider = \"lag\"\npolicy = \"lsg\"\ndelta = 1.0\nalpha = 0.5\ncorpus = \"c\"").is_err());
        assert!(parse("provider = \"lag\"\npolicy = \"waitk\"\ncorpus = \"c\"").is_err());
        let c = parse("provider = \"lag\"\npolicy = \"waitk\"\nk = 3\ncorpus = \"c\"").unwrap();
        assert_eq!((c.policy, c.hp.k), (PolicySpec::WaitK, 3));
        assert!(parse("provider = \"lag\"\npolicy = \"offline\"\ncorpus = \"c\"").is_ok());
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(parse("provider = \"lag\"\npolicy = \"offline\"\ncorpus = \"c\"\nbogus = 1").is_err());
        assert!(parse("provider = \"lag\"\npolicy = \"nope\"\ncorpus = \"c\"").is_err());
        assert!(parse("provider = \"lag\"\npolicy = \"offline\"\npreset = \"xx\"\ncorpus = \"c\"").is_err());
        assert!(parse("provider = \"lag\"\neta = 0.7\npolicy = \"offline\"\ncorpus = \"c\"").is_err());
        assert!(parse("provider = \"table\"\npolicy = \"offline\"\ncorpus = \"c\"").is_err());
        assert!(parse("provider = \"lag\"\npolicy = \"offline\"\ncorpus = \"c\"\nworkers = 0").is_err());
    }

    #[test]
    fn external_provider_keys() {
        let c = parse(
            "provider = \"external\"\nendpoint = \"127.0.0.1:9000\"\nvocab = \"v.txt\"\ntop_k = 5\n\
             rest_mass = \"discard_renormalize\"\npolicy = \"offline\"\ncorpus = \"c\"",
        )
        .unwrap();
        match c.provider {
            ProviderSpec::External { config, vocab, eos } => {
                assert_eq!(config.top_k, 5);
                assert_eq!(config.rest_mass, RestMassPolicy::DiscardRenormalize);
                assert_eq!(vocab, PathBuf::from("/base/v.txt"));
                assert_eq!(eos, "</s>");
            }
            other => panic!("{other:?}"),
        }
    }
}
