use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::backoff::Backoff;
use super::sheet::{PendingWrite, SheetStore};
use crate::cache::{CacheKey, CacheLine, NodeId};
use crate::coherence::RequestId;
use crate::time::{SimDuration, SimTime};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RouterConfig {
    pub backoff_base_s: f64,
    pub backoff_cap_s: f64,
    pub queue_capacity: usize,
    /// Rows carried by one write call. 1 means one call per line.
    pub max_batch_rows: usize,
}

impl Default for RouterConfig {
    fn default() -> Self {
        RouterConfig {
            backoff_base_s: 1.0,
            backoff_cap_s: 64.0,
            queue_capacity: 100_000,
            max_batch_rows: 100,
        }
    }
}

impl RouterConfig {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.backoff_base_s.is_finite() && self.backoff_base_s > 0.0) {
            return Err(("router.backoff_base_s", format!("must be positive, got {}", self.backoff_base_s)));
        }
        if !(self.backoff_cap_s.is_finite() && self.backoff_cap_s >= self.backoff_base_s) {
            return Err(("router.backoff_cap_s", format!("must be >= backoff_base_s, got {}", self.backoff_cap_s)));
        }
        if self.queue_capacity == 0 {
            return Err(("router.queue_capacity", "must be at least 1".into()));
        }
        if self.max_batch_rows == 0 {
            return Err(("router.max_batch_rows", "must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Queued,
    /// A queued entry for the same key now carries the newer copy.
    Coalesced,
    /// An equal or newer copy is already queued or in flight.
    Redundant,
    /// Queued, but the queue was full and its oldest entry was dropped.
    DroppedOldest(CacheLine),
}

/// FIFO of lines awaiting persistence, at most one entry per key.
#[derive(Clone, Debug)]
pub struct WriteQueue {
    order: VecDeque<CacheKey>,
    lines: HashMap<CacheKey, CacheLine>,
    capacity: usize,
    dropped: u64,
}

impl WriteQueue {
    pub fn new(capacity: usize) -> Self {
        WriteQueue { order: VecDeque::new(), lines: HashMap::new(), capacity, dropped: 0 }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn get(&self, key: &CacheKey) -> Option<&CacheLine> {
        self.lines.get(key)
    }

    /// Queued lines, head first.
    pub fn iter(&self) -> impl Iterator<Item = &CacheLine> {
        self.order.iter().map(|k| &self.lines[k])
    }

    /// Appends a line. A duplicate key keeps its queue position and takes
    /// whichever copy has the newer data timestamp.
    pub fn enqueue(&mut self, line: CacheLine) -> EnqueueOutcome {
        if let Some(queued) = self.lines.get_mut(&line.key) {
            if line.data_timestamp > queued.data_timestamp {
                *queued = line;
                return EnqueueOutcome::Coalesced;
            }
            return EnqueueOutcome::Redundant;
        }
        let dropped = if self.order.len() == self.capacity {
            let oldest = self.order.pop_front().expect("full queue");
            self.dropped += 1;
            self.lines.remove(&oldest)
        } else {
            None
        };
        self.order.push_back(line.key);
        self.lines.insert(line.key, line);
        match dropped {
            Some(line) => EnqueueOutcome::DroppedOldest(line),
            None => EnqueueOutcome::Queued,
        }
    }

    pub fn pop_batch(&mut self, max: usize) -> Vec<CacheLine> {
        let n = max.min(self.order.len());
        self.order
            .drain(..n)
            .map(|k| self.lines.remove(&k).expect("queued key has a line"))
            .collect()
    }
}

/// A full-table read issued on behalf of a node, or a bare latency probe.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReadJob {
    pub requester: Option<(NodeId, RequestId)>,
    pub key: Option<CacheKey>,
    pub queued_at: SimTime,
}

#[derive(Clone, Debug)]
enum Job {
    Write(Vec<CacheLine>),
    Read(ReadJob),
}

enum InFlight {
    Write(PendingWrite),
    Read { job: ReadJob, found: Option<CacheLine>, bytes: u64, issued_at: SimTime },
}

/// What the router did when polled.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RouterPoll {
    /// A call is on the wire; call [`Router::complete`] at `complete_at`.
    Started { complete_at: SimTime },
    /// The store refused the call; poll again at `retry_at`.
    RateLimited { retry_at: SimTime, charged_bytes: u64 },
    /// Work is queued but cannot start before `until`.
    Sleep { until: SimTime },
    Idle,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RouterCompletion {
    Write { rows: Vec<CacheLine>, bytes: u64, issued_at: SimTime, overwritten: Vec<CacheKey> },
    Read { job: ReadJob, line: Option<CacheLine>, bytes: u64, issued_at: SimTime },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RouterStats {
    pub write_calls: u64,
    pub read_calls: u64,
    pub rate_limited: u64,
    pub max_queue_depth: usize,
}

/// The fog's single egress to the backing store.
///
/// One call is on the wire at a time. Reads after fog misses and batches of
/// queued writes alternate when both are waiting. Successive write commits
/// are spaced by the store's collision window so the router's own appends
/// never clobber each other. A rate-limited call is retried with binary
/// exponential backoff; any success resets the backoff.
pub struct Router {
    cfg: RouterConfig,
    writes: WriteQueue,
    reads: VecDeque<ReadJob>,
    retry: Option<Job>,
    retry_at: SimTime,
    in_flight: Option<InFlight>,
    in_flight_keys: HashMap<CacheKey, SimTime>,
    backoff: Backoff,
    prefer_read: bool,
    last_write_commit: Option<SimTime>,
    stats: RouterStats,
}

impl Router {
    pub fn new(cfg: RouterConfig) -> Self {
        let backoff = Backoff::new(
            SimDuration::from_secs_f64(cfg.backoff_base_s),
            SimDuration::from_secs_f64(cfg.backoff_cap_s),
        );
        Router {
            writes: WriteQueue::new(cfg.queue_capacity),
            cfg,
            reads: VecDeque::new(),
            retry: None,
            retry_at: SimTime::ZERO,
            in_flight: None,
            in_flight_keys: HashMap::new(),
            backoff,
            prefer_read: true,
            last_write_commit: None,
            stats: RouterStats::default(),
        }
    }

    pub fn stats(&self) -> RouterStats {
        self.stats
    }

    pub fn queue(&self) -> &WriteQueue {
        &self.writes
    }

    pub fn queue_depth(&self) -> usize {
        self.writes.len()
    }

    pub fn pending_reads(&self) -> usize {
        self.reads.len()
    }

    pub fn is_busy(&self) -> bool {
        self.in_flight.is_some()
    }

    pub fn backoff_attempt(&self) -> u32 {
        self.backoff.attempt()
    }

    /// Lines not yet committed: queued, waiting for retry, or on the wire.
    pub fn unpersisted(&self) -> Vec<&CacheLine> {
        let mut out: Vec<&CacheLine> = self.writes.iter().collect();
        if let Some(Job::Write(rows)) = &self.retry {
            out.extend(rows);
        }
        if let Some(InFlight::Write(p)) = &self.in_flight {
            out.extend(&p.rows);
        }
        out
    }

    pub fn enqueue(&mut self, line: CacheLine) -> EnqueueOutcome {
        if matches!(self.in_flight_keys.get(&line.key), Some(&ts) if ts >= line.data_timestamp) {
            return EnqueueOutcome::Redundant;
        }
        let outcome = self.writes.enqueue(line);
        self.stats.max_queue_depth = self.stats.max_queue_depth.max(self.writes.len());
        outcome
    }

    pub fn request_read(&mut self, job: ReadJob) {
        self.reads.push_back(job);
    }

    fn write_ready_at(&self, store: &SheetStore) -> SimTime {
        match self.last_write_commit {
            Some(t) => (t + store.config().collision_window()).saturating_sub(store.config().write_latency()),
            None => SimTime::ZERO,
        }
    }

    fn next_job(&mut self, store: &SheetStore, now: SimTime) -> Result<Job, RouterPoll> {
        let write_ready_at = self.write_ready_at(store);
        if let Some(job) = self.retry.take() {
            let mut until = self.retry_at;
            if matches!(job, Job::Write(_)) {
                until = until.max(write_ready_at);
            }
            if until > now {
                self.retry = Some(job);
                return Err(RouterPoll::Sleep { until });
            }
            return Ok(job);
        }
        let can_write = !self.writes.is_empty() && write_ready_at <= now;
        if self.prefer_read || !can_write {
            if let Some(job) = self.reads.pop_front() {
                return Ok(Job::Read(job));
            }
        }
        if can_write {
            return Ok(Job::Write(self.writes.pop_batch(self.cfg.max_batch_rows)));
        }
        if !self.writes.is_empty() {
            return Err(RouterPoll::Sleep { until: write_ready_at });
        }
        Err(RouterPoll::Idle)
    }

    /// Starts the next call if the router is free.
    pub fn poll(&mut self, store: &mut SheetStore, now: SimTime) -> RouterPoll {
        if self.in_flight.is_some() {
            return RouterPoll::Idle;
        }
        let job = match self.next_job(store, now) {
            Ok(job) => job,
            Err(poll) => return poll,
        };
        let issued = match job {
            Job::Write(rows) => {
                for row in &rows {
                    self.in_flight_keys.insert(row.key, row.data_timestamp);
                }
                match store.begin_write(rows.clone(), now) {
                    Ok(pending) => {
                        let at = pending.commit_at;
                        self.in_flight = Some(InFlight::Write(pending));
                        Ok(at)
                    }
                    Err(_) => Err(Job::Write(rows)),
                }
            }
            Job::Read(job) => match store.read_all(now) {
                Ok(table) => {
                    let found = job.key.and_then(|k| table.rows.iter().find(|r| r.key == k).cloned());
                    let at = table.complete_at;
                    let bytes = table.bytes;
                    self.in_flight = Some(InFlight::Read { job, found, bytes, issued_at: now });
                    Ok(at)
                }
                Err(_) => Err(Job::Read(job)),
            },
        };
        match issued {
            Ok(complete_at) => RouterPoll::Started { complete_at },
            Err(job) => {
                self.stats.rate_limited += 1;
                self.retry = Some(job);
                self.retry_at = now + self.backoff.next_delay();
                RouterPoll::RateLimited {
                    retry_at: self.retry_at,
                    charged_bytes: store.config().rejected_call_bytes,
                }
            }
        }
    }

    /// Finishes the call on the wire. Panics if none is in flight.
    pub fn complete(&mut self, store: &mut SheetStore, now: SimTime) -> RouterCompletion {
        let in_flight = self.in_flight.take().expect("complete without a call in flight");
        self.backoff.reset();
        match in_flight {
            InFlight::Write(pending) => {
                debug_assert_eq!(pending.commit_at, now);
                self.stats.write_calls += 1;
                self.prefer_read = true;
                self.last_write_commit = Some(pending.commit_at);
                for row in &pending.rows {
                    if self.in_flight_keys.get(&row.key) == Some(&row.data_timestamp) {
                        self.in_flight_keys.remove(&row.key);
                    }
                }
                let (rows, bytes, issued_at) = (pending.rows.clone(), pending.bytes, pending.issued_at);
                let report = store.commit(pending);
                RouterCompletion::Write { rows, bytes, issued_at, overwritten: report.overwritten }
            }
            InFlight::Read { job, found, bytes, issued_at } => {
                self.stats.read_calls += 1;
                self.prefer_read = false;
                RouterCompletion::Read { job, line: found, bytes, issued_at }
            }
        }
    }
}
