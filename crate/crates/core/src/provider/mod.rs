//! Sources of next-token distributions.
//!
//! A [`Generator`] answers one question: given the first `read` source
//! elements and the tokens emitted so far, what is the distribution of the
//! next token? The engine never looks at source content itself, so the
//! same loop drives text and speech.

mod external;
mod lag;
mod table;

use std::sync::Arc;

use thiserror::Error;

use crate::dist::{Distribution, DistributionError, TokenId, Vocabulary};
use crate::source::SourceSequence;

pub use external::{reply_to_distribution, ExternalConfig, ExternalProvider, LogitReply, LogitRequest, RestMassPolicy};
pub use lag::{LagLanguage, LagLanguageSpec};
pub use table::{TableFile, TableFileEntry, TableProvider, TableSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("no entry for state read={read} prefix={prefix:?}")]
    UnknownState { read: usize, prefix: Vec<TokenId> },
    #[error("target prefix of length {len} exceeds target length {max}")]
    PrefixOverrun { len: usize, max: usize },
    #[error("read count {read} outside 1..={source_len}")]
    ReadOutOfRange { read: usize, source_len: usize },
    #[error("provider did not reply within {0} ms")]
    ProviderTimeout(u64),
    #[error("protocol error: {0}")]
    ProtocolError(String),
    #[error("provider I/O error: {0}")]
    Io(String),
    #[error("invalid provider spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// Deterministic next-token distribution source.
///
/// Implementations must return the same distribution for the same
/// arguments and be defined for every `1 <= read <= source.len()`.
pub trait Generator {
    fn vocabulary(&self) -> &Vocabulary;

    fn next_distribution(
        &self,
        source: &SourceSequence,
        read: usize,
        prefix: &[TokenId],
    ) -> Result<Distribution, ProviderError>;
}

impl<G: Generator + ?Sized> Generator for &G {
    fn vocabulary(&self) -> &Vocabulary {
        (**self).vocabulary()
    }

    fn next_distribution(
        &self,
        source: &SourceSequence,
        read: usize,
        prefix: &[TokenId],
    ) -> Result<Distribution, ProviderError> {
        (**self).next_distribution(source, read, prefix)
    }
}

impl<G: Generator + ?Sized> Generator for Box<G> {
    fn vocabulary(&self) -> &Vocabulary {
        (**self).vocabulary()
    }

    fn next_distribution(
        &self,
        source: &SourceSequence,
        read: usize,
        prefix: &[TokenId],
    ) -> Result<Distribution, ProviderError> {
        (**self).next_distribution(source, read, prefix)
    }
}

impl<G: Generator + ?Sized> Generator for Arc<G> {
    fn vocabulary(&self) -> &Vocabulary {
        (**self).vocabulary()
    }

    fn next_distribution(
        &self,
        source: &SourceSequence,
        read: usize,
        prefix: &[TokenId],
    ) -> Result<Distribution, ProviderError> {
        (**self).next_distribution(source, read, prefix)
    }
}

pub(crate) fn check_read(read: usize, source_len: usize) -> Result<(), ProviderError> {
    if read == 0 || read > source_len {
        return Err(ProviderError::ReadOutOfRange { read, source_len });
    }
    Ok(())
}
