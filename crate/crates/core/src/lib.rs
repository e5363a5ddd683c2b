//! Simultaneous generation driven by an offline model.
//!
//! A [`provider::Generator`] supplies next-token distributions for a source
//! prefix and a target prefix. [`engine::decode_stream`] walks the target
//! left to right and, for each token, reads source elements until the
//! divergence from the wait-1 view or the model's own confidence says the
//! prefix is enough, inside a bounded window.
//!
//! ```
//! use lsg_core::params::HyperParams;
//! use lsg_core::provider::LagLanguage;
//! use lsg_core::engine::{decode_stream, DecodeLimits};
//!
//! let src = ["a", "b", "c", "d"];
//! let tgt = ["B", "C", "D", "D"];
//! let lang = LagLanguage::from_parallel(&src, &tgt, &[2, 3, 4, 4], 0.0, "</s>").unwrap();
//! let source = lsg_core::source::SourceSequence::text(src).unwrap();
//! let hp = HyperParams::default().with_thresholds(1.0, 0.9).with_range(1, 4);
//! let out = decode_stream(&lang, &source, &hp, &DecodeLimits::default()).unwrap();
//! assert_eq!(out.content_g(), &[2, 3, 4, 4]);
//! ```

pub mod dist;
pub mod engine;
pub mod harness;
pub mod metrics;
pub mod oracle;
pub mod params;
pub mod policy;
pub mod provider;
pub mod source;
pub mod trace;

pub use dist::{Distribution, TokenId, Vocabulary};
pub use engine::{decode_offline, decode_stream, decode_wait_k, DecodeLimits, DecodeResult};
pub use params::HyperParams;
pub use provider::Generator;
pub use source::SourceSequence;
