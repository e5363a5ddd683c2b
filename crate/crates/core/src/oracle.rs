//! Randomized cross-check of [`decode_stream`] against a naive simulator.
//!
//! [`random_case`] builds a small table provider whose entries cover every
//! state a greedy decode can reach. [`brute_force`] re-derives the decode
//! from the bound formulas and the two thresholds with its own arithmetic,
//! reading the table directly, and shares no code with the engine or the
//! policy module.

use std::collections::{HashMap, HashSet, VecDeque};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dist::{TokenId, Vocabulary};
use crate::engine::{decode_stream, DecodeLimits};
use crate::params::HyperParams;
use crate::provider::{TableProvider, TableSpec};
use crate::source::SourceSequence;
use crate::trace::Trigger;

const DELTAS: [f64; 6] = [0.0, 0.05, 0.2, 0.5, 1.0, f64::INFINITY];
const ALPHAS: [f64; 5] = [0.3, 0.5, 0.7, 0.9, 1.01];
const PRE_READS: [usize; 3] = [1, 2, 3];
const AUTONOMIES: [usize; 4] = [0, 1, 2, 4];

pub const MAX_VOCAB: usize = 8;
pub const MAX_SOURCE: usize = 6;
pub const MAX_TARGET: usize = 6;

/// One randomized decode problem.
#[derive(Debug, Clone)]
pub struct OracleCase {
    pub provider: TableProvider,
    pub source: SourceSequence,
    pub hp: HyperParams,
    pub limits: DecodeLimits,
}

/// What the simulator produced for a case.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub tokens: Vec<TokenId>,
    pub g: Vec<usize>,
    pub triggers: Vec<Trigger>,
}

fn random_weights(rng: &mut ChaCha8Rng, size: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..size).map(|_| rng.gen::<f64>().powi(3) + 1e-6).collect();
    if size > 2 && rng.gen_bool(0.15) {
        let zero = rng.gen_range(0..size);
        w[zero] = 0.0;
    }
    w
}

fn naive_argmax(p: &[f64]) -> TokenId {
    let mut best = 0;
    for i in 1..p.len() {
        if p[i] > p[best] {
            best = i;
        }
    }
    best
}

fn naive_normalize(w: &[f64]) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

/// Builds a random instance: vocabulary of 2..=8 tokens (EOS last), source
/// of 1..=6 elements, target capped at 6 tokens, and hyperparameters drawn
/// from a small grid.
pub fn random_case(rng: &mut ChaCha8Rng) -> OracleCase {
    let vocab_size = rng.gen_range(2..=MAX_VOCAB);
    let source_len = rng.gen_range(1..=MAX_SOURCE);
    let max_target = rng.gen_range(1..=MAX_TARGET);
    let mut tokens: Vec<String> = (0..vocab_size - 1).map(|i| format!("w{i}")).collect();
    tokens.push("</s>".into());
    let vocabulary = Vocabulary::new(tokens, vocab_size - 1).expect("valid vocabulary");
    let eos = vocab_size - 1;

    let mut entries = HashMap::new();
    let mut queue = VecDeque::from([Vec::<TokenId>::new()]);
    let mut seen = HashSet::new();
    while let Some(prefix) = queue.pop_front() {
        if !seen.insert(prefix.clone()) {
            continue;
        }
        // how much the distribution moves as more source arrives
        let drift = [0.0, 0.3, 1.0][rng.gen_range(0..3)];
        let shared = random_weights(rng, vocab_size);
        let mut children = HashSet::new();
        for read in 1..=source_len {
            let own = random_weights(rng, vocab_size);
            let mut w: Vec<f64> = shared
                .iter()
                .zip(&own)
                .map(|(s, o)| s * (1.0 - drift) + o * drift)
                .collect();
            if w.iter().all(|x| *x == 0.0) {
                w[0] = 1.0;
            }
            let p = naive_normalize(&w);
            children.insert(naive_argmax(&p));
            let mut masked = p.clone();
            masked[eos] = 0.0;
            if masked.iter().any(|x| *x > 0.0) {
                children.insert(naive_argmax(&naive_normalize(&masked)));
            } else {
                children.insert(0);
            }
            entries.insert((read, prefix.clone()), w);
        }
        if prefix.len() + 1 < max_target {
            for c in children.into_iter().filter(|&c| c != eos) {
                let mut next = prefix.clone();
                next.push(c);
                queue.push_back(next);
            }
        }
    }

    let provider = TableProvider::new(TableSpec { vocabulary, entries }).expect("valid table");
    let source = SourceSequence::text((0..source_len).map(|i| format!("x{i}"))).expect("non-empty source");
    let hp = HyperParams {
        delta: DELTAS[rng.gen_range(0..DELTAS.len())],
        alpha: ALPHAS[rng.gen_range(0..ALPHAS.len())],
        pre_read: PRE_READS[rng.gen_range(0..PRE_READS.len())],
        autonomy: AUTONOMIES[rng.gen_range(0..AUTONOMIES.len())],
        ..HyperParams::default()
    };
    let limits = DecodeLimits {
        max_target_len: max_target,
        mask_early_eos: rng.gen_bool(0.7),
        ..DecodeLimits::default()
    };
    OracleCase {
        provider,
        source,
        hp,
        limits,
    }
}

/// Step-by-step simulation straight from the rule: for token `i`, try every
/// read count from where the last token left off up to the upper bound
/// and stop at the first one that writes.
pub fn brute_force(case: &OracleCase) -> Result<SimOutcome, String> {
    let table = &case.provider;
    let big_j = case.source.len();
    let eos = crate::provider::Generator::vocabulary(table).eos_id();
    let hp = &case.hp;

    let view = |read: usize, prefix: &[TokenId]| -> Result<Vec<f64>, String> {
        let p = table.lookup(read, prefix).map_err(|e| e.to_string())?.probs().to_vec();
        if !(case.limits.mask_early_eos && read < big_j) {
            return Ok(p);
        }
        let mut m = p;
        m[eos] = 0.0;
        let total: f64 = m.iter().sum();
        if total > 0.0 {
            Ok(m.iter().map(|x| x / total).collect())
        } else {
            let n = m.len() as f64 - 1.0;
            Ok((0..m.len()).map(|k| if k == eos { 0.0 } else { 1.0 / n }).collect())
        }
    };
    let divergence = |p: &[f64], q: &[f64]| -> f64 {
        let mut s = 0.0;
        for k in 0..p.len() {
            if p[k] > 0.0 {
                s += p[k] * ((p[k] + 1e-10) / (q[k] + 1e-10)).ln();
            }
        }
        if s < 0.0 {
            0.0
        } else {
            s
        }
    };

    let mut out = SimOutcome {
        tokens: vec![],
        g: vec![],
        triggers: vec![],
    };
    let mut last_read = 0;
    for i in 1..=case.limits.max_target_len {
        let lo = std::cmp::min(hp.pre_read + i - 1, big_j);
        let hi = std::cmp::min(hp.pre_read + i - 1 + hp.autonomy, big_j);
        let base = view(std::cmp::min(i, big_j), &out.tokens)?;
        let mut written = None;
        for j in std::cmp::max(last_read, lo)..=hi {
            let cur = view(j, &out.tokens)?;
            let top = cur.iter().cloned().fold(0.0, f64::max);
            let trig = if j == big_j {
                Trigger::SourceExhausted
            } else if j == hi {
                Trigger::ForcedUpperBound
            } else if divergence(&cur, &base) > hp.delta {
                Trigger::Kl
            } else if top > hp.alpha {
                Trigger::Confidence
            } else {
                Trigger::AwaitingInput
            };
            out.triggers.push(trig);
            if trig != Trigger::AwaitingInput {
                written = Some((j, naive_argmax(&cur)));
                break;
            }
        }
        let (j, tok) = written.ok_or_else(|| format!("no write for token {i}"))?;
        last_read = j;
        out.tokens.push(tok);
        out.g.push(j);
        if tok == eos {
            break;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Mismatch {
    pub case: usize,
    pub engine: Option<SimOutcome>,
    pub oracle: Option<SimOutcome>,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub cases: usize,
    pub mismatches: Vec<Mismatch>,
    pub elapsed: Duration,
}

/// Runs `cases` random instances from `seed` through both the engine and
/// [`brute_force`] and collects every disagreement.
pub fn check(seed: u64, cases: usize) -> OracleReport {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = Vec::new();
    for index in 0..cases {
        let case = random_case(&mut rng);
        let engine = decode_stream(&case.provider, &case.source, &case.hp, &case.limits).map(|r| SimOutcome {
            tokens: r.tokens.clone(),
            g: r.trace.g.clone(),
            triggers: r.trace.steps.iter().map(|s| s.trigger).collect(),
        });
        let oracle = brute_force(&case);
        match (engine, oracle) {
            (Ok(e), Ok(o)) if e == o => {}
            (e, o) => mismatches.push(Mismatch {
                case: index,
                detail: format!("{:?} / {:?}", e.as_ref().err(), o.as_ref().err()),
                engine: e.ok(),
                oracle: o.ok(),
            }),
        }
    }
    OracleReport {
        cases,
        mismatches,
        elapsed: started.elapsed(),
    }
}
