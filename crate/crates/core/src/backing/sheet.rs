use std::collections::{HashMap, VecDeque};
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::StoreError;
use crate::cache::{CacheKey, CacheLine};
use crate::time::{SimDuration, SimTime};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoreConfig {
    /// Accepted calls allowed per rolling window.
    pub rate_limit_calls: u32,
    pub rate_window_s: f64,
    pub write_latency_s: f64,
    /// Fixed part of a full-table read; the transfer term is added on top.
    pub read_latency_s: f64,
    pub throughput_bytes_per_s: u64,
    /// Appends committed closer together than this land in the same row slot.
    pub collision_window_s: f64,
    /// Request/response framing charged on every accepted call.
    pub call_header_bytes: u64,
    /// WAN bytes charged for a call rejected by the rate limiter.
    pub rejected_call_bytes: u64,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig {
            rate_limit_calls: 500,
            rate_window_s: 100.0,
            write_latency_s: 0.3,
            read_latency_s: 0.5,
            throughput_bytes_per_s: 1_000_000,
            collision_window_s: 0.5,
            call_header_bytes: 128,
            rejected_call_bytes: 512,
        }
    }
}

impl StoreConfig {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let non_negative = |name, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err((name, format!("must be a finite number >= 0, got {v}")))
            }
        };
        if self.rate_limit_calls == 0 {
            return Err(("store.rate_limit_calls", "must be at least 1".into()));
        }
        non_negative("store.rate_window_s", self.rate_window_s)?;
        if self.rate_window_s == 0.0 {
            return Err(("store.rate_window_s", "must be positive".into()));
        }
        non_negative("store.write_latency_s", self.write_latency_s)?;
        non_negative("store.read_latency_s", self.read_latency_s)?;
        non_negative("store.collision_window_s", self.collision_window_s)?;
        if self.throughput_bytes_per_s == 0 {
            return Err(("store.throughput_bytes_per_s", "must be at least 1".into()));
        }
        Ok(())
    }

    pub fn write_latency(&self) -> SimDuration {
        SimDuration::from_secs_f64(self.write_latency_s)
    }

    pub fn collision_window(&self) -> SimDuration {
        SimDuration::from_secs_f64(self.collision_window_s)
    }

    /// Time to move `bytes` at the configured throughput, rounded up to whole ms.
    pub fn transfer_time(&self, bytes: u64) -> SimDuration {
        SimDuration::from_millis((bytes * 1000).div_ceil(self.throughput_bytes_per_s))
    }

    /// Latency of a full-table read returning `bytes`.
    pub fn read_latency(&self, bytes: u64) -> SimDuration {
        SimDuration::from_secs_f64(self.read_latency_s) + self.transfer_time(bytes)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    Write,
    Read,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CallRecord {
    pub at: SimTime,
    pub kind: CallKind,
    pub accepted: bool,
}

/// An accepted write call whose rows land at `commit_at`.
#[derive(Clone, Debug)]
pub struct PendingWrite {
    pub rows: Vec<CacheLine>,
    pub issued_at: SimTime,
    pub commit_at: SimTime,
    pub bytes: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CommitReport {
    pub appended: usize,
    pub updated: usize,
    /// Keys whose rows were clobbered by a contemporaneous append.
    pub overwritten: Vec<CacheKey>,
}

/// Result of a full-table read: every row, as the store held them when the
/// call was accepted.
pub struct TableRead<'a> {
    pub rows: &'a [CacheLine],
    pub bytes: u64,
    pub issued_at: SimTime,
    pub complete_at: SimTime,
}

/// Mock spreadsheet backing store.
///
/// It has no server-side query: the only read returns the whole table. Calls
/// are admitted against a rolling-window quota, and appends that commit
/// within the collision window of the previous append overwrite its row.
pub struct SheetStore {
    cfg: StoreConfig,
    rate_window: SimDuration,
    rows: Vec<CacheLine>,
    index: HashMap<CacheKey, usize>,
    table_bytes: u64,
    accepted_in_window: VecDeque<SimTime>,
    call_log: Vec<CallRecord>,
    last_append: Option<(SimTime, usize)>,
}

impl SheetStore {
    pub fn new(cfg: StoreConfig) -> Self {
        SheetStore {
            rate_window: SimDuration::from_secs_f64(cfg.rate_window_s),
            cfg,
            rows: Vec::new(),
            index: HashMap::new(),
            table_bytes: 0,
            accepted_in_window: VecDeque::new(),
            call_log: Vec::new(),
            last_append: None,
        }
    }

    pub fn config(&self) -> &StoreConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[CacheLine] {
        &self.rows
    }

    pub fn get(&self, key: &CacheKey) -> Option<&CacheLine> {
        self.index.get(key).map(|&i| &self.rows[i])
    }

    pub fn call_log(&self) -> &[CallRecord] {
        &self.call_log
    }

    /// Bytes a full-table read would transfer right now.
    pub fn read_all_bytes(&self) -> u64 {
        self.cfg.call_header_bytes + self.table_bytes
    }

    fn admit(&mut self, now: SimTime, kind: CallKind) -> Result<(), StoreError> {
        while let Some(&front) = self.accepted_in_window.front() {
            if front + self.rate_window <= now {
                self.accepted_in_window.pop_front();
            } else {
                break;
            }
        }
        let accepted = self.accepted_in_window.len() < self.cfg.rate_limit_calls as usize;
        self.call_log.push(CallRecord { at: now, kind, accepted });
        if accepted {
            self.accepted_in_window.push_back(now);
            Ok(())
        } else {
            Err(StoreError::RateLimited { at: now })
        }
    }

    /// Issues a write call carrying `rows`. Nothing is visible until
    /// [`commit`](Self::commit) is applied at `commit_at`.
    pub fn begin_write(&mut self, rows: Vec<CacheLine>, now: SimTime) -> Result<PendingWrite, StoreError> {
        self.admit(now, CallKind::Write)?;
        let bytes = self.cfg.call_header_bytes + rows.iter().map(|r| r.encoded_len() as u64).sum::<u64>();
        Ok(PendingWrite { rows, issued_at: now, commit_at: now + self.cfg.write_latency(), bytes })
    }

    /// Applies an accepted write. Commits must be applied in `commit_at` order.
    ///
    /// Existing keys are upserted in place when the incoming copy is at least
    /// as new. New keys are appended, except that the first append of a call
    /// committing within the collision window of the previous append reuses
    /// that append's slot, losing the earlier row.
    pub fn commit(&mut self, write: PendingWrite) -> CommitReport {
        let mut report = CommitReport::default();
        let mut first_append = true;
        for row in write.rows {
            let row = CacheLine { dirty: false, ..row };
            if let Some(&slot) = self.index.get(&row.key) {
                if row.data_timestamp >= self.rows[slot].data_timestamp {
                    self.table_bytes = self.table_bytes - self.rows[slot].encoded_len() as u64 + row.encoded_len() as u64;
                    self.rows[slot] = row;
                    report.updated += 1;
                }
                continue;
            }
            let collides = first_append
                && matches!(self.last_append, Some((t, _))
                    if write.commit_at.saturating_since(t) < self.cfg.collision_window());
            first_append = false;
            let slot = if collides {
                let (_, slot) = self.last_append.expect("collision implies a previous append");
                let lost = std::mem::replace(&mut self.rows[slot], row);
                self.index.remove(&lost.key);
                self.table_bytes -= lost.encoded_len() as u64;
                report.overwritten.push(lost.key);
                slot
            } else {
                self.rows.push(row);
                report.appended += 1;
                self.rows.len() - 1
            };
            let row = &self.rows[slot];
            self.table_bytes += row.encoded_len() as u64;
            self.index.insert(row.key, slot);
            self.last_append = Some((write.commit_at, slot));
        }
        report
    }

    /// Single-row write applied eagerly. Returns the commit time.
    pub fn store_write(&mut self, line: CacheLine, now: SimTime) -> Result<SimTime, StoreError> {
        let pending = self.begin_write(vec![line], now)?;
        let at = pending.commit_at;
        self.commit(pending);
        Ok(at)
    }

    /// Full-table read: every row, header plus encoded rows in bytes.
    pub fn read_all(&mut self, now: SimTime) -> Result<TableRead<'_>, StoreError> {
        self.admit(now, CallKind::Read)?;
        let bytes = self.read_all_bytes();
        Ok(TableRead {
            rows: &self.rows,
            bytes,
            issued_at: now,
            complete_at: now + self.cfg.read_latency(bytes),
        })
    }

    /// Most accepted calls found in any rolling window of the call log.
    pub fn max_accepted_in_any_window(&self) -> usize {
        let times: Vec<SimTime> = self.call_log.iter().filter(|c| c.accepted).map(|c| c.at).collect();
        let mut best = 0;
        let mut lo = 0;
        for hi in 0..times.len() {
            while times[lo] + self.rate_window <= times[hi] {
                lo += 1;
            }
            best = best.max(hi - lo + 1);
        }
        best
    }

    /// Writes the table as CSV, one row per slot in append order.
    pub fn export_csv(&self, path: &Path) -> io::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["key_hex", "valid", "time_inserted", "data_timestamp", "origin_node", "payload_hex"])?;
        for row in &self.rows {
            w.write_record([
                row.key.to_hex(),
                u8::from(row.valid).to_string(),
                row.time_inserted.to_string(),
                row.data_timestamp.to_string(),
                row.origin.to_string(),
                hex::encode(&row.payload),
            ])?;
        }
        w.flush()
    }
}
