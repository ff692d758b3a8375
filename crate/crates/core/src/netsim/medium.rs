use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NetsimError;
use crate::cache::NodeId;
use crate::time::{SimDuration, SimTime};

/// One-way latency distribution for LAN deliveries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelayModel {
    Constant { delay_s: f64 },
    Uniform { min_s: f64, max_s: f64 },
}

impl Default for DelayModel {
    fn default() -> Self {
        DelayModel::Constant { delay_s: 0.005 }
    }
}

impl DelayModel {
    pub fn validate(&self) -> Result<(), String> {
        match *self {
            DelayModel::Constant { delay_s } if !(delay_s.is_finite() && delay_s >= 0.0) => {
                Err(format!("delay_s must be finite and >= 0, got {delay_s}"))
            }
            DelayModel::Uniform { min_s, max_s }
                if !(min_s.is_finite() && max_s.is_finite() && 0.0 <= min_s && min_s <= max_s) =>
            {
                Err(format!("uniform delay needs 0 <= min_s <= max_s, got [{min_s}, {max_s}]"))
            }
            _ => Ok(()),
        }
    }

    /// Upper end of the distribution.
    pub fn max(&self) -> SimDuration {
        match *self {
            DelayModel::Constant { delay_s } => SimDuration::from_secs_f64(delay_s),
            DelayModel::Uniform { max_s, .. } => SimDuration::from_secs_f64(max_s),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> SimDuration {
        match *self {
            DelayModel::Constant { delay_s } => SimDuration::from_secs_f64(delay_s),
            DelayModel::Uniform { min_s, max_s } => {
                let lo = SimDuration::from_secs_f64(min_s).as_millis();
                let hi = SimDuration::from_secs_f64(max_s).as_millis();
                SimDuration::from_millis(rng.random_range(lo..=hi))
            }
        }
    }
}

/// Whether latency is drawn fresh for every delivery or fixed per link.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelaySampling {
    #[default]
    PerDelivery,
    /// One symmetric delay per unordered node pair, drawn when the medium is built.
    PerLink,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Delivery {
    pub to: NodeId,
    pub at: SimTime,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BroadcastOutcome {
    pub deliveries: Vec<Delivery>,
    pub lost: Vec<NodeId>,
    /// Bytes put on the medium: encoded size times attempted receivers.
    pub charged_bytes: u64,
}

/// Shared broadcast channel connecting every node of the fog.
///
/// Every copy of a broadcast is lost independently with probability `p` at
/// each receiver. Surviving copies arrive after a sampled one-way delay.
pub struct BroadcastMedium {
    n_nodes: u32,
    loss_probability: f64,
    delay: DelayModel,
    link_delays: Option<Vec<SimDuration>>,
    rng: ChaCha8Rng,
    lan_bytes: u64,
    broadcasts: u64,
}

impl BroadcastMedium {
    pub fn new(
        n_nodes: u32,
        loss_probability: f64,
        delay: DelayModel,
        sampling: DelaySampling,
        mut rng: ChaCha8Rng,
    ) -> Result<Self, NetsimError> {
        if !(0.0..=1.0).contains(&loss_probability) {
            return Err(NetsimError::BadProbability(loss_probability));
        }
        delay.validate().map_err(NetsimError::BadDelay)?;
        let link_delays = match sampling {
            DelaySampling::PerDelivery => None,
            DelaySampling::PerLink => {
                let n = n_nodes as usize;
                let mut table = vec![SimDuration::ZERO; n * n];
                for i in 0..n {
                    for j in (i + 1)..n {
                        let d = delay.sample(&mut rng);
                        table[i * n + j] = d;
                        table[j * n + i] = d;
                    }
                }
                Some(table)
            }
        };
        Ok(BroadcastMedium {
            n_nodes,
            loss_probability,
            delay,
            link_delays,
            rng,
            lan_bytes: 0,
            broadcasts: 0,
        })
    }

    /// A medium with its own ChaCha8 stream derived from `seed`.
    pub fn seeded(
        n_nodes: u32,
        loss_probability: f64,
        delay: DelayModel,
        sampling: DelaySampling,
        seed: u64,
    ) -> Result<Self, NetsimError> {
        Self::new(n_nodes, loss_probability, delay, sampling, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn n_nodes(&self) -> u32 {
        self.n_nodes
    }

    pub fn loss_probability(&self) -> f64 {
        self.loss_probability
    }

    pub fn lan_bytes(&self) -> u64 {
        self.lan_bytes
    }

    pub fn broadcasts(&self) -> u64 {
        self.broadcasts
    }

    /// Fixed delay of the link between `a` and `b` in per-link mode.
    pub fn link_delay(&self, a: NodeId, b: NodeId) -> Option<SimDuration> {
        let n = self.n_nodes as usize;
        self.link_delays
            .as_ref()
            .map(|t| t[a.0 as usize * n + b.0 as usize])
    }

    /// Sends `encoded_len` bytes from `sender` to every other node.
    ///
    /// Receivers are visited in ascending id order; for each one a loss draw
    /// is made and, if the copy survives, a delay draw.
    pub fn broadcast(&mut self, now: SimTime, sender: NodeId, encoded_len: usize) -> BroadcastOutcome {
        assert!(sender.0 < self.n_nodes, "unregistered sender {sender}");
        let receivers = u64::from(self.n_nodes - 1);
        let charged_bytes = encoded_len as u64 * receivers;
        self.lan_bytes += charged_bytes;
        self.broadcasts += 1;

        let mut outcome = BroadcastOutcome {
            deliveries: Vec::with_capacity(receivers as usize),
            lost: Vec::new(),
            charged_bytes,
        };
        for k in (0..self.n_nodes).map(NodeId).filter(|&k| k != sender) {
            let lost = self.rng.random::<f64>() < self.loss_probability;
            if lost {
                outcome.lost.push(k);
                continue;
            }
            let delay = match self.link_delay(sender, k) {
                Some(d) => d,
                None => self.delay.sample(&mut self.rng),
            };
            outcome.deliveries.push(Delivery { to: k, at: now + delay });
        }
        outcome
    }
}
