//! Soft coherence over a lossy broadcast medium.
//!
//! Writes are announced once and never retransmitted. A reader that misses
//! locally broadcasts a request, waits a fixed window, and keeps the copy
//! with the newest data timestamp among whatever answers arrive. Nodes that
//! lack the key stay silent, so silence is the only miss signal.

mod message;
mod node;

pub use message::{FogMessage, MessageBody, RequestId};
pub use node::{
    Action, FinishedRead, FogNode, NodeParams, NodeStats, PendingRead, PingSample, ReadOutcome, ReadStart,
};
