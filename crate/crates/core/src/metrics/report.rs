use std::collections::HashMap;

use serde::Serialize;

use super::event::{EventKind, EventLog};
use super::MetricsError;
use crate::time::SimTime;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RttStats {
    pub min_s: f64,
    pub mean_s: f64,
    pub max_s: f64,
    pub samples: u64,
    /// Rounds that timed out before every peer replied. Not in min/mean/max.
    pub incomplete: u64,
}

/// Aggregates over one window of an event log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub window_start_s: f64,
    pub window_end_s: f64,

    pub generates: u64,
    pub reads_local: u64,
    pub reads_fog: u64,
    pub reads_miss: u64,
    pub reads_skipped: u64,
    /// Misses over completed reads.
    pub miss_ratio: f64,
    /// Store-touching operations (misses and accepted write calls) over all
    /// cache operations (generates and non-skipped reads).
    pub backing_fraction: f64,

    pub wan_bytes: u64,
    pub wan_calls: u64,
    pub lan_bytes: u64,
    pub wan_bytes_per_sec: f64,
    pub lan_bytes_per_sec: f64,
    pub mean_wan_transaction_bytes: f64,
    /// Reads served without the store: local plus fog hits.
    pub local_transactions: u64,
    pub mean_local_transaction_bytes: f64,

    pub store_write_calls: u64,
    pub store_read_calls: u64,
    pub rate_limited_calls: u64,
    pub max_queue_depth: u64,

    pub announces_sent: u64,
    pub complete_losses: u64,
    /// Announces delivered to no receiver at all, over announces sent.
    pub complete_loss_rate: f64,

    pub rtt: Option<RttStats>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Computes a report over events with `t0 <= time <= t1`, or over the whole
/// log when no window is given.
pub fn report(log: &EventLog, window: Option<(SimTime, SimTime)>) -> Result<MetricsReport, MetricsError> {
    let events = log.events();
    if events.is_empty() {
        return Err(MetricsError::EmptyLog);
    }
    let (t0, t1) = match window {
        Some((a, b)) if a > b => return Err(MetricsError::BadWindow { start: a, end: b }),
        Some(w) => w,
        None => {
            let end = events.iter().map(|e| e.time).max().expect("non-empty");
            (SimTime::ZERO, end)
        }
    };

    let mut r = MetricsReport {
        window_start_s: t0.as_secs_f64(),
        window_end_s: t1.as_secs_f64(),
        generates: 0,
        reads_local: 0,
        reads_fog: 0,
        reads_miss: 0,
        reads_skipped: 0,
        miss_ratio: 0.0,
        backing_fraction: 0.0,
        wan_bytes: 0,
        wan_calls: 0,
        lan_bytes: 0,
        wan_bytes_per_sec: 0.0,
        lan_bytes_per_sec: 0.0,
        mean_wan_transaction_bytes: 0.0,
        local_transactions: 0,
        mean_local_transaction_bytes: 0.0,
        store_write_calls: 0,
        store_read_calls: 0,
        rate_limited_calls: 0,
        max_queue_depth: 0,
        announces_sent: 0,
        complete_losses: 0,
        complete_loss_rate: 0.0,
        rtt: None,
    };
    let mut seen = 0u64;
    let mut local_bytes = 0u64;
    let mut lost_by_announce: HashMap<u64, u32> = HashMap::new();
    let mut sent_ids = Vec::new();
    let mut rtts = Vec::new();
    let mut incomplete = 0u64;

    for e in events.iter().filter(|e| e.time >= t0 && e.time <= t1) {
        seen += 1;
        let size = e.size_bytes.unwrap_or(0);
        match e.kind {
            EventKind::Generate { .. } => r.generates += 1,
            EventKind::AnnounceSent { announce } => sent_ids.push(announce),
            EventKind::AnnounceLost { announce } => *lost_by_announce.entry(announce).or_default() += 1,
            EventKind::AnnounceDelivered { .. } => {}
            EventKind::ReadLocalHit { .. } => {
                r.reads_local += 1;
                local_bytes += size;
            }
            EventKind::ReadFogHit { .. } => {
                r.reads_fog += 1;
                local_bytes += size;
            }
            EventKind::ReadMiss { .. } => r.reads_miss += 1,
            EventKind::ReadSkipped => r.reads_skipped += 1,
            EventKind::StoreWriteOk { .. } => r.store_write_calls += 1,
            EventKind::StoreReadAll { .. } => r.store_read_calls += 1,
            EventKind::StoreRateLimited => r.rate_limited_calls += 1,
            EventKind::PingRtt { rtt, complete } => {
                if complete {
                    rtts.push(rtt.as_secs_f64());
                } else {
                    incomplete += 1;
                }
            }
            EventKind::QueueDepth { depth } => r.max_queue_depth = r.max_queue_depth.max(depth),
            EventKind::BytesLan => r.lan_bytes += size,
            EventKind::BytesWan => {
                r.wan_bytes += size;
                r.wan_calls += 1;
            }
        }
    }
    if seen == 0 {
        return Err(MetricsError::EmptyWindow { start: t0, end: t1 });
    }

    let completed = r.reads_local + r.reads_fog + r.reads_miss;
    r.miss_ratio = ratio(r.reads_miss, completed);
    r.backing_fraction = ratio(r.reads_miss + r.store_write_calls, r.generates + completed).min(1.0);

    let span = (t1 - t0).as_secs_f64();
    if span > 0.0 {
        r.wan_bytes_per_sec = r.wan_bytes as f64 / span;
        r.lan_bytes_per_sec = r.lan_bytes as f64 / span;
    }
    r.mean_wan_transaction_bytes = ratio(r.wan_bytes, r.wan_calls);
    r.local_transactions = r.reads_local + r.reads_fog;
    r.mean_local_transaction_bytes = ratio(local_bytes, r.local_transactions);

    let receivers = log.n_nodes().saturating_sub(1);
    r.announces_sent = sent_ids.len() as u64;
    r.complete_losses =
        sent_ids.iter().filter(|id| lost_by_announce.get(id).copied().unwrap_or(0) >= receivers).count() as u64;
    r.complete_loss_rate = ratio(r.complete_losses, r.announces_sent);

    if !rtts.is_empty() || incomplete > 0 {
        let n = rtts.len();
        let (min_s, mean_s, max_s) = if n == 0 {
            (0.0, 0.0, 0.0)
        } else {
            (
                rtts.iter().copied().fold(f64::INFINITY, f64::min),
                rtts.iter().sum::<f64>() / n as f64,
                rtts.iter().copied().fold(0.0, f64::max),
            )
        };
        r.rtt = Some(RttStats { min_s, mean_s, max_s, samples: n as u64, incomplete });
    }
    Ok(r)
}

/// `[warmup_fraction * duration, duration]`.
pub fn steady_state_window(duration: SimTime, warmup_fraction: f64) -> (SimTime, SimTime) {
    let start = SimTime::from_secs_f64(duration.as_secs_f64() * warmup_fraction.clamp(0.0, 1.0));
    (start, duration)
}
