//! Discrete-event scheduling and the lossy broadcast medium that links the
//! fog's nodes, plus closed-form loss probabilities for that medium.

mod medium;
mod scheduler;

use thiserror::Error;

pub use medium::{BroadcastMedium, BroadcastOutcome, DelayModel, DelaySampling, Delivery};
pub use scheduler::Scheduler;

#[derive(Debug, Error, PartialEq)]
pub enum NetsimError {
    #[error("probability must lie in [0, 1], got {0}")]
    BadProbability(f64),
    #[error("the loss bound needs at least 2 nodes, got {0}")]
    TooFewNodes(u32),
    #[error("invalid delay model: {0}")]
    BadDelay(String),
}

/// Markov-inequality bound on a broadcast being lost fog-wide:
/// `Pr[sum of per-node losses >= N-1] <= p / (N-1)`.
pub fn markov_loss_bound(p: f64, n_nodes: u32) -> Result<f64, NetsimError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(NetsimError::BadProbability(p));
    }
    if n_nodes < 2 {
        return Err(NetsimError::TooFewNodes(n_nodes));
    }
    Ok(p / f64::from(n_nodes - 1))
}

/// Probability that every one of `receivers` independent copies is lost.
pub fn exact_complete_loss(p: f64, receivers: u32) -> f64 {
    p.powi(receivers as i32)
}
