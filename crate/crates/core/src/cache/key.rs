use std::fmt;

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_128;

use crate::time::SimTime;

/// Identifier of a fog node. Small integers, dense from zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// 128-bit cache key.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CacheKey(u128);

impl CacheKey {
    pub const fn from_u128(v: u128) -> Self {
        CacheKey(v)
    }

    pub const fn as_u128(self) -> u128 {
        self.0
    }

    pub fn to_be_bytes(self) -> [u8; 16] {
        self.0.to_be_bytes()
    }

    pub fn from_be_bytes(bytes: [u8; 16]) -> Self {
        CacheKey(u128::from_be_bytes(bytes))
    }

    pub fn to_hex(self) -> String {
        format!("{:032x}", self.0)
    }
}

impl fmt::Debug for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CacheKey({:032x})", self.0)
    }
}

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

/// Derives the key for a freshly generated datum.
///
/// The key is the XXH3-128 digest (seed 0) of the ASCII string
/// `"node=<id>;ts_ms=<data timestamp in ms>;seq=<seq>"`. XXH3 is fixed here
/// rather than using the std hasher so keys are stable across platforms and
/// releases.
pub fn make_key(node: NodeId, data_timestamp: SimTime, seq: u64) -> CacheKey {
    let canonical = format!("node={};ts_ms={};seq={}", node.0, data_timestamp.as_millis(), seq);
    CacheKey(xxh3_128(canonical.as_bytes()))
}
