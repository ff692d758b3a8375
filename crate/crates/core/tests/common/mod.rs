#![allow(dead_code)]

use std::num::NonZeroUsize;

use fogcache::cache::{make_key, CacheKey, CacheLine, CacheStore, NodeId};
use fogcache::config::ExperimentConfig;
use fogcache::time::SimTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Brute-force LRU: a vector ordered most recently used first.
#[derive(Default)]
pub struct OracleLru {
    capacity: usize,
    lines: Vec<CacheLine>,
}

impl OracleLru {
    pub fn new(capacity: usize) -> Self {
        OracleLru { capacity, lines: Vec::new() }
    }

    fn position(&self, key: &CacheKey) -> Option<usize> {
        self.lines.iter().position(|l| l.key == *key)
    }

    fn promote(&mut self, i: usize) {
        let line = self.lines.remove(i);
        self.lines.insert(0, line);
    }

    pub fn insert(&mut self, line: CacheLine) -> Option<CacheLine> {
        if let Some(i) = self.position(&line.key) {
            if line.data_timestamp > self.lines[i].data_timestamp {
                self.lines[i] = line;
            }
            self.promote(i);
            return None;
        }
        let evicted = if self.lines.len() == self.capacity { self.lines.pop() } else { None };
        self.lines.insert(0, line);
        evicted
    }

    pub fn lookup(&mut self, key: &CacheKey) -> Option<CacheLine> {
        let i = self.position(key)?;
        if !self.lines[i].valid {
            return None;
        }
        self.promote(i);
        Some(self.lines[0].clone())
    }

    pub fn peek(&self, key: &CacheKey) -> Option<CacheLine> {
        self.position(key).map(|i| self.lines[i].clone()).filter(|l| l.valid)
    }

    pub fn invalidate(&mut self, key: &CacheKey) -> bool {
        match self.position(key) {
            Some(i) => {
                self.lines[i].valid = false;
                true
            }
            None => false,
        }
    }

    pub fn keys(&self) -> Vec<CacheKey> {
        self.lines.iter().map(|l| l.key).collect()
    }
}

#[derive(Clone, Debug)]
pub enum LruOp {
    Insert { key: u16, ts: u64 },
    Lookup { key: u16 },
    Peek { key: u16 },
    Invalidate { key: u16 },
}

pub fn key_of(k: u16) -> CacheKey {
    make_key(NodeId(u32::from(k % 7)), SimTime::ZERO, u64::from(k))
}

pub fn line_of(k: u16, ts: u64) -> CacheLine {
    CacheLine::generated(key_of(k), NodeId(u32::from(k % 7)), SimTime::from_millis(ts), ts.to_be_bytes().to_vec())
}

/// Random operation trace over a key domain somewhat larger than the capacity.
pub fn random_trace(capacity: usize, len: usize, seed: u64) -> Vec<LruOp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain = (capacity * 3 + 2).min(u16::MAX as usize) as u16;
    (0..len)
        .map(|_| {
            let key = rng.random_range(0..domain);
            match rng.random_range(0..10) {
                0..=4 => LruOp::Insert { key, ts: rng.random_range(0..50) },
                5..=7 => LruOp::Lookup { key },
                8 => LruOp::Peek { key },
                _ => LruOp::Invalidate { key },
            }
        })
        .collect()
}

/// Replays `ops` against the store and the oracle, comparing every result,
/// the full recency order after each step, and the eviction sequence.
/// Returns the number of evictions.
pub fn check_lru_trace(capacity: usize, ops: &[LruOp]) -> Result<usize, String> {
    let mut store = CacheStore::new(NonZeroUsize::new(capacity).expect("capacity >= 1"));
    let mut oracle = OracleLru::new(capacity);
    let (mut got_evictions, mut want_evictions) = (Vec::new(), Vec::new());
    for (step, op) in ops.iter().enumerate() {
        match *op {
            LruOp::Insert { key, ts } => {
                let line = line_of(key, ts);
                got_evictions.extend(store.insert(line.clone()).map(|l| l.key));
                want_evictions.extend(oracle.insert(line).map(|l| l.key));
            }
            LruOp::Lookup { key } => {
                let got = store.lookup(&key_of(key)).cloned();
                let want = oracle.lookup(&key_of(key));
                if got != want {
                    return Err(format!("step {step}: lookup {key} gave {got:?}, oracle {want:?}"));
                }
            }
            LruOp::Peek { key } => {
                let got = store.peek(&key_of(key)).cloned();
                let want = oracle.peek(&key_of(key));
                if got != want {
                    return Err(format!("step {step}: peek {key} gave {got:?}, oracle {want:?}"));
                }
            }
            LruOp::Invalidate { key } => {
                if store.invalidate(&key_of(key)) != oracle.invalidate(&key_of(key)) {
                    return Err(format!("step {step}: invalidate {key} disagrees"));
                }
            }
        }
        if store.keys_by_recency() != oracle.keys() {
            return Err(format!("step {step}: recency order differs after {op:?}"));
        }
        if got_evictions != want_evictions {
            return Err(format!("step {step}: eviction sequences differ after {op:?}"));
        }
    }
    Ok(got_evictions.len())
}

/// Default config scaled to `n` nodes and `duration_s` seconds.
pub fn config(n: u32, loss: f64, duration_s: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.fog.n_nodes = n;
    cfg.fog.loss_probability = loss;
    cfg.workload.duration_s = duration_s;
    cfg
}

/// Binomial standard deviation of a proportion estimated from `n` trials.
pub fn binomial_sigma(q: f64, n: u64) -> f64 {
    (q * (1.0 - q) / n as f64).sqrt()
}
