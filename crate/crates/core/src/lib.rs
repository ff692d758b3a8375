//! Deterministic discrete-event simulator of a distributed fog cache.
//!
//! Edge nodes share a loss-tolerant cache over a broadcast LAN and persist
//! through a single rate-limited egress to a spreadsheet-like backing store.

pub mod backing;
pub mod cache;
pub mod coherence;
pub mod config;
pub mod experiment;
pub mod fog;
pub mod metrics;
pub mod netsim;
pub mod time;
pub mod workload;
