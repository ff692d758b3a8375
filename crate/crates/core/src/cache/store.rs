use std::collections::{BTreeMap, HashMap};
use std::num::NonZeroUsize;

use super::key::CacheKey;
use super::line::CacheLine;
use crate::time::SimTime;

#[derive(Clone, Debug)]
struct Slot {
    line: CacheLine,
    tick: u64,
}

/// Fixed-capacity cache of lines with least-recently-used replacement.
///
/// Recency is a monotone tick per touch; `recency` maps tick to key, so its
/// first entry is always the eviction victim.
#[derive(Clone, Debug)]
pub struct CacheStore {
    capacity: NonZeroUsize,
    lines: HashMap<CacheKey, Slot>,
    recency: BTreeMap<u64, CacheKey>,
    next_tick: u64,
}

impl CacheStore {
    pub fn new(capacity: NonZeroUsize) -> Self {
        CacheStore {
            capacity,
            lines: HashMap::with_capacity(capacity.get()),
            recency: BTreeMap::new(),
            next_tick: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity.get()
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn contains(&self, key: &CacheKey) -> bool {
        self.lines.contains_key(key)
    }

    fn touch(&mut self, key: CacheKey) {
        let tick = self.next_tick;
        self.next_tick += 1;
        let slot = self.lines.get_mut(&key).expect("touch of non-resident key");
        self.recency.remove(&slot.tick);
        slot.tick = tick;
        self.recency.insert(tick, key);
    }

    /// Inserts or updates a line and marks it most recently used.
    ///
    /// For a resident key the incoming copy replaces the stored one only if
    /// its `data_timestamp` is strictly newer. When a new key arrives at a
    /// full store, the least recently used line is removed and returned.
    pub fn insert(&mut self, line: CacheLine) -> Option<CacheLine> {
        debug_assert!(line.valid, "only valid lines may be inserted");
        let key = line.key;
        if let Some(slot) = self.lines.get_mut(&key) {
            if line.data_timestamp > slot.line.data_timestamp {
                slot.line = line;
            }
            self.touch(key);
            return None;
        }
        let evicted = if self.lines.len() == self.capacity.get() {
            let (_, victim) = self.recency.pop_first().expect("full store has a recency entry");
            self.lines.remove(&victim).map(|slot| slot.line)
        } else {
            None
        };
        let tick = self.next_tick;
        self.next_tick += 1;
        self.recency.insert(tick, key);
        self.lines.insert(key, Slot { line, tick });
        evicted
    }

    /// Returns the resident valid line for `key`, promoting it.
    pub fn lookup(&mut self, key: &CacheKey) -> Option<&CacheLine> {
        match self.lines.get(key) {
            Some(slot) if slot.line.valid => {
                self.touch(*key);
                self.lines.get(key).map(|slot| &slot.line)
            }
            _ => None,
        }
    }

    /// Like [`lookup`](Self::lookup) without touching recency.
    pub fn peek(&self, key: &CacheKey) -> Option<&CacheLine> {
        self.lines.get(key).map(|slot| &slot.line).filter(|line| line.valid)
    }

    /// Clears the valid bit of a resident line. The line keeps its recency
    /// position and still occupies capacity.
    pub fn invalidate(&mut self, key: &CacheKey) -> bool {
        match self.lines.get_mut(key) {
            Some(slot) => {
                slot.line.valid = false;
                true
            }
            None => false,
        }
    }

    /// Clears the dirty bit if the resident copy is the version that was persisted.
    pub fn mark_clean(&mut self, key: &CacheKey, data_timestamp: SimTime) -> bool {
        match self.lines.get_mut(key) {
            Some(slot) if slot.line.data_timestamp == data_timestamp && slot.line.dirty => {
                slot.line.dirty = false;
                true
            }
            _ => false,
        }
    }

    /// Resident keys from most to least recently used.
    pub fn keys_by_recency(&self) -> Vec<CacheKey> {
        self.recency.values().rev().copied().collect()
    }

    /// Resident lines from most to least recently used.
    pub fn lines_by_recency(&self) -> impl Iterator<Item = &CacheLine> {
        self.recency.values().rev().map(|key| &self.lines[key].line)
    }
}
