//! Compiles the guide's listings as doc-tests. One module per chapter so
//! a failure points at its chapter.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}
#[doc = include_str!("../../../book/src/distributions.md")]
pub mod distributions {}
#[doc = include_str!("../../../book/src/providers.md")]
pub mod providers {}
#[doc = include_str!("../../../book/src/policy.md")]
pub mod policy {}
#[doc = include_str!("../../../book/src/engine.md")]
pub mod engine {}
#[doc = include_str!("../../../book/src/latency.md")]
pub mod latency {}
#[doc = include_str!("../../../book/src/quality.md")]
pub mod quality {}
#[doc = include_str!("../../../book/src/harness.md")]
pub mod harness {}
