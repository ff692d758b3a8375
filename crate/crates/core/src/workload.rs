//! Evaluation workload: periodic writes of random payloads and periodic reads
//! of keys the reader has observed.

use indexmap::IndexSet;
use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cache::{CacheKey, NodeId};
use crate::time::{SimDuration, SimTime};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyChoice {
    /// Uniform over the newest `recency_window` known keys.
    #[default]
    Recency,
    /// Uniform over every key the node has ever observed.
    Uniform,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMode {
    /// Node `i` of `N` is offset by `i * period / N`.
    #[default]
    Staggered,
    /// Every node fires at the same instants.
    Synchronized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadConfig {
    pub write_period_s: f64,
    pub read_period_s: f64,
    pub payload_size: usize,
    pub duration_s: f64,
    pub key_choice: KeyChoice,
    /// Defaults to the cache capacity when absent.
    pub recency_window: Option<usize>,
    pub phases: PhaseMode,
    /// Probability that a write tick rewrites a known key instead of creating one.
    pub update_fraction: f64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            write_period_s: 1.0,
            read_period_s: 15.0,
            payload_size: 256,
            duration_s: 600.0,
            key_choice: KeyChoice::Recency,
            recency_window: None,
            phases: PhaseMode::Staggered,
            update_fraction: 0.0,
        }
    }
}

impl WorkloadConfig {
    /// Checks field ranges. Returns the offending field and a reason.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let positive = |name, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err((name, format!("must be a positive number of seconds, got {v}")))
            }
        };
        positive("workload.write_period_s", self.write_period_s)?;
        positive("workload.read_period_s", self.read_period_s)?;
        positive("workload.duration_s", self.duration_s)?;
        if self.duration_s < 10.0 * self.read_period_s {
            return Err((
                "workload.duration_s",
                format!(
                    "must cover at least 10 read periods ({} s), got {}",
                    10.0 * self.read_period_s,
                    self.duration_s
                ),
            ));
        }
        if self.recency_window == Some(0) {
            return Err(("workload.recency_window", "must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.update_fraction) {
            return Err(("workload.update_fraction", format!("must lie in [0, 1], got {}", self.update_fraction)));
        }
        Ok(())
    }
}

/// Keys a node has observed, in first-observation order.
#[derive(Clone, Debug, Default)]
pub struct KnownKeys {
    keys: IndexSet<CacheKey>,
}

impl KnownKeys {
    /// Records an observation. Returns true the first time a key is seen.
    pub fn observe(&mut self, key: CacheKey) -> bool {
        self.keys.insert(key)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn contains(&self, key: &CacheKey) -> bool {
        self.keys.contains(key)
    }

    pub fn get(&self, index: usize) -> Option<CacheKey> {
        self.keys.get_index(index).copied()
    }

    /// The newest `window` keys, oldest first.
    pub fn newest(&self, window: usize) -> impl Iterator<Item = CacheKey> + '_ {
        let start = self.keys.len().saturating_sub(window);
        (start..self.keys.len()).map(|i| self.keys[i])
    }
}

/// Per-run workload generator.
///
/// Draws on two dedicated streams: one for key choice and update decisions,
/// one for payload bytes.
pub struct Workload {
    write_period: SimDuration,
    read_period: SimDuration,
    payload_size: usize,
    duration: SimDuration,
    key_choice: KeyChoice,
    recency_window: usize,
    phases: PhaseMode,
    update_fraction: f64,
    key_rng: ChaCha8Rng,
    payload_rng: ChaCha8Rng,
}

impl Workload {
    pub fn new(cfg: &WorkloadConfig, cache_capacity: usize, key_rng: ChaCha8Rng, payload_rng: ChaCha8Rng) -> Self {
        Workload {
            write_period: SimDuration::from_secs_f64(cfg.write_period_s),
            read_period: SimDuration::from_secs_f64(cfg.read_period_s),
            payload_size: cfg.payload_size,
            duration: SimDuration::from_secs_f64(cfg.duration_s),
            key_choice: cfg.key_choice,
            recency_window: cfg.recency_window.unwrap_or(cache_capacity),
            phases: cfg.phases,
            update_fraction: cfg.update_fraction,
            key_rng,
            payload_rng,
        }
    }

    pub fn write_period(&self) -> SimDuration {
        self.write_period
    }

    pub fn read_period(&self) -> SimDuration {
        self.read_period
    }

    pub fn duration(&self) -> SimDuration {
        self.duration
    }

    pub fn payload_size(&self) -> usize {
        self.payload_size
    }

    pub fn recency_window(&self) -> usize {
        self.recency_window
    }

    fn phase(&self, period: SimDuration, node: NodeId, n_nodes: u32) -> SimDuration {
        match self.phases {
            PhaseMode::Staggered => SimDuration::from_millis(period.as_millis() * u64::from(node.0) / u64::from(n_nodes)),
            PhaseMode::Synchronized => SimDuration::ZERO,
        }
    }

    /// Writes per node: one per full write period in the run.
    pub fn writes_per_node(&self) -> u64 {
        self.duration.as_millis() / self.write_period.as_millis()
    }

    /// Reads per node: one per full read period in the run.
    pub fn reads_per_node(&self) -> u64 {
        self.duration.as_millis() / self.read_period.as_millis()
    }

    /// Time of the node's `k`-th write, `k` counted from zero.
    pub fn write_time(&self, node: NodeId, n_nodes: u32, k: u64) -> SimTime {
        SimTime::ZERO + self.phase(self.write_period, node, n_nodes) + self.write_period * k
    }

    /// Time of the node's `k`-th read, `k` counted from zero. The first read
    /// comes one full period after the node's phase.
    pub fn read_time(&self, node: NodeId, n_nodes: u32, k: u64) -> SimTime {
        SimTime::ZERO + self.phase(self.read_period, node, n_nodes) + self.read_period * (k + 1)
    }

    /// Uniformly random payload of the configured size.
    pub fn payload(&mut self) -> Vec<u8> {
        let mut bytes = vec![0u8; self.payload_size];
        self.payload_rng.fill_bytes(&mut bytes);
        bytes
    }

    pub fn wants_update(&mut self) -> bool {
        self.update_fraction > 0.0 && self.key_rng.random::<f64>() < self.update_fraction
    }

    /// Picks the key for a read; `None` when the node knows no keys.
    pub fn choose_key(&mut self, known: &KnownKeys) -> Option<CacheKey> {
        if known.is_empty() {
            return None;
        }
        let span = match self.key_choice {
            KeyChoice::Recency => self.recency_window.min(known.len()),
            KeyChoice::Uniform => known.len(),
        };
        let start = known.len() - span;
        known.get(start + self.key_rng.random_range(0..span))
    }
}
