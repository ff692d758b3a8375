//! Per-node cache storage: key derivation, the line format, LRU replacement,
//! and the rule that picks a winner among conflicting copies of one key.

mod key;
mod line;
mod store;

use thiserror::Error;

pub use key::{make_key, CacheKey, NodeId};
pub use line::{CacheLine, LINE_HEADER_LEN};
pub use store::CacheStore;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CacheError {
    #[error("buffer truncated: need {needed} bytes, have {got}")]
    Truncated { needed: usize, got: usize },
    #[error("valid flag must be 0 or 1, got {0}")]
    BadValidFlag(u8),
    #[error("unknown message tag {0}")]
    UnknownMessageTag(u8),
    #[error("internal error: resolve called with no responses")]
    EmptyResponses,
    #[error("internal error: resolve called with lines for different keys")]
    MixedKeys,
}

/// Picks the freshest copy among responses for one key.
///
/// The winner has the greatest `data_timestamp`; equal timestamps go to the
/// smallest origin node id so the outcome does not depend on arrival order.
pub fn resolve(responses: &[CacheLine]) -> Result<&CacheLine, CacheError> {
    let first = responses.first().ok_or(CacheError::EmptyResponses)?;
    if responses.iter().any(|l| l.key != first.key) {
        return Err(CacheError::MixedKeys);
    }
    Ok(responses
        .iter()
        .min_by(|a, b| {
            b.data_timestamp
                .cmp(&a.data_timestamp)
                .then(a.origin.cmp(&b.origin))
        })
        .expect("non-empty"))
}
