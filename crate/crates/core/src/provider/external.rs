//! Client for an out-of-process logit server.
//!
//! The wire format is newline-delimited JSON over a byte stream, one reply
//! per request, in order:
//!
//! ```text
//! -> {"id": 7, "source": ["s0", "s1"], "target_prefix": ["the"]}
//! <- {"id": 7, "logprobs": {"cat": -0.22, "dog": -1.6}, "truncated": true}
//! ```

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{check_read, Generator, ProviderError};
use crate::dist::{make_distribution, Distribution, DistributionError, TokenId, Vocabulary};
use crate::source::SourceSequence;

/// How probability mass missing from a truncated reply is filled in.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestMassPolicy {
    /// Spread `1 - listed mass` evenly over the unlisted tokens.
    #[default]
    UniformSpread,
    /// Drop the unlisted tokens and renormalize the listed ones.
    DiscardRenormalize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalConfig {
    /// `host:port` (optionally prefixed with `tcp://`) or `exec:<shell command>`.
    pub endpoint: String,
    pub timeout_ms: u64,
    pub top_k: usize,
    #[serde(default)]
    pub rest_mass: RestMassPolicy,
}

impl ExternalConfig {
    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.timeout_ms == 0 {
            return Err(ProviderError::InvalidSpec("timeout must be positive".into()));
        }
        if self.top_k == 0 {
            return Err(ProviderError::InvalidSpec("top_k must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitRequest {
    pub id: u64,
    pub source: Vec<String>,
    pub target_prefix: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitReply {
    pub id: u64,
    pub logprobs: BTreeMap<String, f64>,
    #[serde(default)]
    pub truncated: bool,
}

struct Connection {
    writer: Box<dyn Write + Send>,
    replies: Receiver<std::io::Result<String>>,
    next_id: u64,
    child: Option<Child>,
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Some(child) = self.child.as_mut() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Requests are serialized over a single connection.
pub struct ExternalProvider {
    vocabulary: Vocabulary,
    config: ExternalConfig,
    conn: Mutex<Connection>,
}

impl std::fmt::Debug for ExternalProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalProvider")
            .field("endpoint", &self.config.endpoint)
            .field("vocab_size", &self.vocabulary.len())
            .finish()
    }
}

fn io_err(e: std::io::Error) -> ProviderError {
    ProviderError::Io(e.to_string())
}

impl ExternalProvider {
    pub fn connect(vocabulary: Vocabulary, config: ExternalConfig) -> Result<Self, ProviderError> {
        config.validate()?;
        if let Some(cmd) = config.endpoint.strip_prefix("exec:") {
            let mut child = Command::new("sh")
                .arg("-c")
                .arg(cmd)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .spawn()
                .map_err(io_err)?;
            let stdin = child.stdin.take().expect("piped stdin");
            let stdout = child.stdout.take().expect("piped stdout");
            let mut p = Self::from_streams(vocabulary, config, stdout, stdin)?;
            p.conn.get_mut().expect("fresh mutex").child = Some(child);
            Ok(p)
        } else {
            let addr = config
                .endpoint
                .strip_prefix("tcp://")
                .unwrap_or(&config.endpoint)
                .to_string();
            let stream = TcpStream::connect(&addr).map_err(io_err)?;
            let _ = stream.set_nodelay(true);
            let reader = stream.try_clone().map_err(io_err)?;
            Self::from_streams(vocabulary, config, reader, stream)
        }
    }

    /// Wraps an already-open byte stream pair.
    pub fn from_streams<R, W>(
        vocabulary: Vocabulary,
        config: ExternalConfig,
        reader: R,
        writer: W,
    ) -> Result<Self, ProviderError>
    where
        R: std::io::Read + Send + 'static,
        W: Write + Send + 'static,
    {
        config.validate()?;
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        Ok(Self {
            vocabulary,
            config,
            conn: Mutex::new(Connection {
                writer: Box::new(writer),
                replies: rx,
                next_id: 0,
                child: None,
            }),
        })
    }

    pub fn config(&self) -> &ExternalConfig {
        &self.config
    }

    fn round_trip(&self, source: Vec<String>, target_prefix: Vec<String>) -> Result<LogitReply, ProviderError> {
        let mut conn = self
            .conn
            .lock()
            .map_err(|_| ProviderError::Io("connection poisoned".into()))?;
        let id = conn.next_id;
        conn.next_id += 1;
        let request = LogitRequest {
            id,
            source,
            target_prefix,
        };
        let mut line = serde_json::to_string(&request).expect("request serializes");
        line.push('\n');
        conn.writer.write_all(line.as_bytes()).map_err(io_err)?;
        conn.writer.flush().map_err(io_err)?;

        let timeout = Duration::from_millis(self.config.timeout_ms);
        let deadline = std::time::Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(std::time::Instant::now());
            let raw = match conn.replies.recv_timeout(left) {
                Ok(Ok(raw)) => raw,
                Ok(Err(e)) => return Err(io_err(e)),
                Err(RecvTimeoutError::Timeout) => return Err(ProviderError::ProviderTimeout(self.config.timeout_ms)),
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(ProviderError::Io("logit server closed the stream".into()))
                }
            };
            let reply: LogitReply = serde_json::from_str(&raw)
                .map_err(|e| ProviderError::ProtocolError(format!("bad reply {raw:?}: {e}")))?;
            // late answers to requests that already timed out
            if reply.id < id {
                continue;
            }
            if reply.id != id {
                return Err(ProviderError::ProtocolError(format!(
                    "expected reply id {id}, got {}",
                    reply.id
                )));
            }
            return Ok(reply);
        }
    }
}

/// Turns a (possibly truncated) log-probability reply into a distribution
/// over the whole vocabulary.
pub fn reply_to_distribution(
    vocabulary: &Vocabulary,
    reply: &LogitReply,
    top_k: usize,
    rest_mass: RestMassPolicy,
) -> Result<Distribution, ProviderError> {
    let mut listed: Vec<(TokenId, f64)> = Vec::with_capacity(reply.logprobs.len());
    for (tok, &lp) in &reply.logprobs {
        let id = vocabulary
            .id(tok)
            .ok_or_else(|| ProviderError::ProtocolError(format!("unknown token {tok:?}")))?;
        if lp.is_nan() || lp > 1e-9 {
            return Err(DistributionError::InvalidDistribution(format!("log-probability {lp} for {tok:?}")).into());
        }
        listed.push((id, lp.min(0.0).exp()));
    }
    listed.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    listed.truncate(top_k);

    let size = vocabulary.len();
    let mut weights = vec![0.0; size];
    for &(id, p) in &listed {
        weights[id] = p;
    }
    let mass: f64 = listed.iter().map(|(_, p)| p).sum();
    if mass > 1.0 + 1e-6 {
        return Err(DistributionError::InvalidDistribution(format!("reply mass {mass} exceeds 1")).into());
    }
    let unlisted = size - listed.len();
    if rest_mass == RestMassPolicy::UniformSpread && unlisted > 0 {
        let rest = 1.0 - mass;
        // float dust from complete replies is not spread
        if rest > 1e-12 {
            let share = rest / unlisted as f64;
            for w in weights.iter_mut().filter(|w| **w == 0.0) {
                *w = share;
            }
            // listed tokens with zero probability are still listed
            for &(id, p) in &listed {
                weights[id] = p;
            }
        }
    }
    Ok(make_distribution(&weights)?)
}

impl Generator for ExternalProvider {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    fn next_distribution(
        &self,
        source: &SourceSequence,
        read: usize,
        prefix: &[TokenId],
    ) -> Result<Distribution, ProviderError> {
        check_read(read, source.len())?;
        let reply = self.round_trip(source.prefix(read).to_vec(), self.vocabulary.decode(prefix))?;
        reply_to_distribution(&self.vocabulary, &reply, self.config.top_k, self.config.rest_mass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab4() -> Vocabulary {
        Vocabulary::with_eos(["a", "b", "c"], "</s>").unwrap()
    }

    fn reply(entries: &[(&str, f64)]) -> LogitReply {
        LogitReply {
            id: 0,
            logprobs: entries.iter().map(|(t, p)| (t.to_string(), *p)).collect(),
            truncated: true,
        }
    }

    #[test]
    fn discard_renormalize_keeps_exact_mass() {
        let v = Vocabulary::with_eos(["a", "b", "c", "d"], "</s>").unwrap();
        let r = reply(&[("d", 0.7f64.ln()), ("b", 0.3f64.ln())]);
        let d = reply_to_distribution(&v, &r, 2, RestMassPolicy::DiscardRenormalize).unwrap();
        let want = [0.0, 0.3, 0.0, 0.7, 0.0];
        for (g, w) in d.probs().iter().zip(want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_spread_fills_residual() {
        let r = reply(&[("a", 0.6f64.ln()), ("b", 0.3f64.ln())]);
        let d = reply_to_distribution(&vocab4(), &r, 2, RestMassPolicy::UniformSpread).unwrap();
        // 1 - 0.9 split over the two unlisted tokens
        let want = [0.6, 0.3, 0.05, 0.05];
        for (g, w) in d.probs().iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
    }

    #[test]
    fn top_k_truncates_reply() {
        let r = reply(&[("a", 0.5f64.ln()), ("b", 0.3f64.ln()), ("c", 0.2f64.ln())]);
        let d = reply_to_distribution(&vocab4(), &r, 1, RestMassPolicy::DiscardRenormalize).unwrap();
        assert_eq!(d.probs(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn validation_errors() {
        let v = vocab4();
        let r = reply(&[("zzz", -0.1)]);
        assert!(matches!(
            reply_to_distribution(&v, &r, 4, RestMassPolicy::UniformSpread),
            Err(ProviderError::ProtocolError(_))
        ));
        let r = reply(&[("a", 0.9f64.ln()), ("b", 0.9f64.ln())]);
        assert!(matches!(
            reply_to_distribution(&v, &r, 4, RestMassPolicy::UniformSpread),
            Err(ProviderError::Distribution(DistributionError::InvalidDistribution(_)))
        ));
        let r = reply(&[("a", 0.5)]);
        assert!(matches!(
            reply_to_distribution(&v, &r, 4, RestMassPolicy::UniformSpread),
            Err(ProviderError::Distribution(_))
        ));
    }

    #[test]
    fn config_validation() {
        let mut c = ExternalConfig {
            endpoint: "127.0.0.1:1".into(),
            timeout_ms: 0,
            top_k: 5,
            rest_mass: RestMassPolicy::UniformSpread,
        };
        assert!(c.validate().is_err());
        c.timeout_ms = 10;
        c.top_k = 0;
        assert!(c.validate().is_err());
    }
}
