use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::thread;

use lsg_core::engine::decode_stream;
use lsg_core::provider::{
    ExternalConfig, ExternalProvider, Generator, LagLanguage, LogitReply, LogitRequest, ProviderError,
};
use lsg_core::{DecodeLimits, HyperParams, SourceSequence};

const SRC: [&str; 5] = ["a", "b", "c", "d", "e"];
const TGT: [&str; 5] = ["Tb", "Tc", "Td", "Te", "Te"];
const PI: [usize; 5] = [2, 3, 4, 5, 5];

fn lang() -> LagLanguage {
    LagLanguage::from_parallel(&SRC, &TGT, &PI, 0.1, "</s>").unwrap()
}

/// Serves the lag language over one TCP connection. `mangle` may rewrite
/// each reply before it is sent; returning `None` drops it.
fn serve(mangle: fn(LogitReply) -> Option<LogitReply>) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut out = stream.try_clone().unwrap();
        let model = lang();
        let full = SourceSequence::text(SRC).unwrap();
        for line in BufReader::new(stream).lines() {
            let Ok(line) = line else { break };
            let req: LogitRequest = serde_json::from_str(&line).unwrap();
            let prefix: Vec<usize> = req
                .target_prefix
                .iter()
                .map(|t| model.vocabulary().id(t).unwrap())
                .collect();
            let dist = model.next_distribution(&full, req.source.len(), &prefix).unwrap();
            let logprobs: BTreeMap<String, f64> = dist
                .probs()
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > 0.0)
                .map(|(i, p)| (model.vocabulary().token(i).unwrap().to_string(), p.ln()))
                .collect();
            if let Some(reply) = mangle(LogitReply {
                id: req.id,
                logprobs,
                truncated: false,
            }) {
                let mut body = serde_json::to_string(&reply).unwrap();
                body.push('\n');
                if out.write_all(body.as_bytes()).is_err() {
                    break;
                }
            }
        }
    });
    addr
}

fn client(endpoint: String, timeout_ms: u64) -> ExternalProvider {
    let config = ExternalConfig {
        endpoint,
        timeout_ms,
        top_k: 64,
        rest_mass: Default::default(),
    };
    ExternalProvider::connect(lang().vocabulary().clone(), config).unwrap()
}

#[test]
fn remote_decode_matches_in_process() {
    let remote = client(serve(Some), 5_000);
    let source = SourceSequence::text(SRC).unwrap();
    let hp = HyperParams::default().with_thresholds(1.0, 0.95).with_range(1, 4);
    let limits = DecodeLimits::default();
    let local = decode_stream(&lang(), &source, &hp, &limits).unwrap();
    let over_wire = decode_stream(&remote, &source, &hp, &limits).unwrap();
    assert_eq!(local.tokens, over_wire.tokens);
    assert_eq!(local.trace.g, over_wire.trace.g);
    assert_eq!(local.trace.steps.len(), over_wire.trace.steps.len());
}

#[test]
fn silent_server_times_out() {
    let remote = client(serve(|_| None), 100);
    let source = SourceSequence::text(SRC).unwrap();
    let err = remote.next_distribution(&source, 1, &[]).unwrap_err();
    assert!(matches!(err, ProviderError::ProviderTimeout(100)), "{err:?}");
}

#[test]
fn wrong_reply_id_is_a_protocol_error() {
    let remote = client(
        serve(|mut r| {
            r.id += 5;
            Some(r)
        }),
        5_000,
    );
    let source = SourceSequence::text(SRC).unwrap();
    let err = remote.next_distribution(&source, 1, &[]).unwrap_err();
    assert!(matches!(err, ProviderError::ProtocolError(_)), "{err:?}");
}

#[test]
fn unknown_token_is_a_protocol_error() {
    let remote = client(
        serve(|mut r| {
            r.logprobs.insert("zzz".into(), -30.0);
            Some(r)
        }),
        5_000,
    );
    let source = SourceSequence::text(SRC).unwrap();
    assert!(matches!(
        remote.next_distribution(&source, 1, &[]),
        Err(ProviderError::ProtocolError(_))
    ));
}

#[test]
fn exec_endpoint_speaks_the_same_protocol() {
    // a one-token model: every request gets the end token
    let cmd = r#"exec:while read -r line; do id=$(echo "$line" | sed 's/.*"id":\([0-9]*\).*/\1/'); echo "{\"id\":$id,\"logprobs\":{\"</s>\":0.0}}"; done"#;
    let vocab = lsg_core::Vocabulary::with_eos(["x"], "</s>").unwrap();
    let config = ExternalConfig {
        endpoint: cmd.into(),
        timeout_ms: 5_000,
        top_k: 8,
        rest_mass: Default::default(),
    };
    let remote = ExternalProvider::connect(vocab, config).unwrap();
    let source = SourceSequence::text(["s"]).unwrap();
    let out = lsg_core::decode_offline(&remote, &source, &DecodeLimits::default()).unwrap();
    assert_eq!(out.tokens, vec![1]);
}
