use std::fmt::{self, Write as _};
use std::io::{self, Write};

use xxhash_rust::xxh3::Xxh3;

use super::MetricsError;
use crate::cache::{CacheKey, NodeId};
use crate::time::{SimDuration, SimTime};

/// Who emitted an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Source {
    Node(NodeId),
    Router,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Node(id) => write!(f, "n{id}"),
            Source::Router => f.write_str("router"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Generate { key: CacheKey },
    AnnounceSent { announce: u64 },
    AnnounceDelivered { announce: u64 },
    AnnounceLost { announce: u64 },
    ReadLocalHit { key: CacheKey },
    ReadFogHit { key: CacheKey, responses: u32 },
    ReadMiss { key: CacheKey },
    ReadSkipped,
    StoreWriteOk { rows: u32 },
    StoreRateLimited,
    StoreReadAll { found: bool },
    PingRtt { rtt: SimDuration, complete: bool },
    QueueDepth { depth: u64 },
    BytesLan,
    BytesWan,
}

pub const KIND_COUNT: usize = 15;

pub const KIND_NAMES: [&str; KIND_COUNT] = [
    "Generate",
    "AnnounceSent",
    "AnnounceDelivered",
    "AnnounceLost",
    "ReadLocalHit",
    "ReadFogHit",
    "ReadMiss",
    "ReadSkipped",
    "StoreWriteOk",
    "StoreRateLimited",
    "StoreReadAll",
    "PingRTT",
    "QueueDepth",
    "BytesLAN",
    "BytesWAN",
];

impl EventKind {
    pub fn index(&self) -> usize {
        match self {
            EventKind::Generate { .. } => 0,
            EventKind::AnnounceSent { .. } => 1,
            EventKind::AnnounceDelivered { .. } => 2,
            EventKind::AnnounceLost { .. } => 3,
            EventKind::ReadLocalHit { .. } => 4,
            EventKind::ReadFogHit { .. } => 5,
            EventKind::ReadMiss { .. } => 6,
            EventKind::ReadSkipped => 7,
            EventKind::StoreWriteOk { .. } => 8,
            EventKind::StoreRateLimited => 9,
            EventKind::StoreReadAll { .. } => 10,
            EventKind::PingRtt { .. } => 11,
            EventKind::QueueDepth { .. } => 12,
            EventKind::BytesLan => 13,
            EventKind::BytesWan => 14,
        }
    }

    pub fn name(&self) -> &'static str {
        KIND_NAMES[self.index()]
    }

    fn write_detail(&self, out: &mut String) {
        let _ = match self {
            EventKind::Generate { key } | EventKind::ReadLocalHit { key } | EventKind::ReadMiss { key } => {
                write!(out, "{key}")
            }
            EventKind::ReadFogHit { key, responses } => write!(out, "{key}/{responses}"),
            EventKind::AnnounceSent { announce }
            | EventKind::AnnounceDelivered { announce }
            | EventKind::AnnounceLost { announce } => write!(out, "a{announce}"),
            EventKind::StoreWriteOk { rows } => write!(out, "rows={rows}"),
            EventKind::StoreReadAll { found } => write!(out, "found={}", u8::from(*found)),
            EventKind::PingRtt { rtt, complete } => write!(out, "rtt_ms={};complete={}", rtt.as_millis(), u8::from(*complete)),
            EventKind::QueueDepth { depth } => write!(out, "depth={depth}"),
            EventKind::ReadSkipped | EventKind::StoreRateLimited | EventKind::BytesLan | EventKind::BytesWan => Ok(()),
        };
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub time: SimTime,
    pub source: Source,
    pub kind: EventKind,
    pub size_bytes: Option<u64>,
}

impl Event {
    pub fn new(time: SimTime, source: Source, kind: EventKind) -> Self {
        Event { time, source, kind, size_bytes: None }
    }

    pub fn sized(time: SimTime, source: Source, kind: EventKind, size: u64) -> Self {
        Event { time, source, kind, size_bytes: Some(size) }
    }

    /// `time_ms,source,kind,size,detail` with an empty size when absent.
    pub fn to_line(&self) -> String {
        let mut s = String::with_capacity(64);
        let _ = write!(s, "{},{},{},", self.time.as_millis(), self.source, self.kind.name());
        if let Some(size) = self.size_bytes {
            let _ = write!(s, "{size}");
        }
        s.push(',');
        self.kind.write_detail(&mut s);
        s
    }
}

/// Per-kind event counts and byte sums.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub counts: [u64; KIND_COUNT],
    pub bytes: [u64; KIND_COUNT],
}

impl Counters {
    fn add(&mut self, event: &Event) {
        let i = event.kind.index();
        self.counts[i] += 1;
        self.bytes[i] += event.size_bytes.unwrap_or(0);
    }

    pub fn count(&self, name: &str) -> u64 {
        KIND_NAMES.iter().position(|n| *n == name).map_or(0, |i| self.counts[i])
    }

    pub fn bytes_of(&self, name: &str) -> u64 {
        KIND_NAMES.iter().position(|n| *n == name).map_or(0, |i| self.bytes[i])
    }
}

/// Append-only simulation log. Counters are maintained on every record and
/// can be checked against a full recount.
#[derive(Clone, Debug)]
pub struct EventLog {
    n_nodes: u32,
    events: Vec<Event>,
    last_time: Vec<Option<SimTime>>,
    counters: Counters,
}

impl EventLog {
    pub fn new(n_nodes: u32) -> Self {
        EventLog {
            n_nodes,
            events: Vec::new(),
            last_time: vec![None; n_nodes as usize + 1],
            counters: Counters::default(),
        }
    }

    pub fn n_nodes(&self) -> u32 {
        self.n_nodes
    }

    fn source_slot(&self, source: Source) -> usize {
        match source {
            Source::Node(id) => {
                assert!(id.0 < self.n_nodes, "event from unknown node {id}");
                id.0 as usize
            }
            Source::Router => self.n_nodes as usize,
        }
    }

    /// Appends an event. Rejects an event older than the last one recorded
    /// for the same source.
    pub fn record(&mut self, event: Event) -> Result<(), MetricsError> {
        let slot = self.source_slot(event.source);
        if let Some(last) = self.last_time[slot] {
            if event.time < last {
                return Err(MetricsError::OutOfOrder { emitter: event.source.to_string(), at: event.time, last });
            }
        }
        self.last_time[slot] = Some(event.time);
        self.counters.add(&event);
        self.events.push(event);
        Ok(())
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    /// Counters recomputed from the raw events.
    pub fn recount(&self) -> Counters {
        let mut c = Counters::default();
        for e in &self.events {
            c.add(e);
        }
        c
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "time_ms,source,kind,size_bytes,detail")?;
        for e in &self.events {
            writeln!(w, "{}", e.to_line())?;
        }
        Ok(())
    }

    /// XXH3-128 digest of the serialized log.
    pub fn digest(&self) -> u128 {
        let mut h = Xxh3::new();
        h.update(b"time_ms,source,kind,size_bytes,detail\n");
        for e in &self.events {
            h.update(e.to_line().as_bytes());
            h.update(b"\n");
        }
        h.digest128()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(ms: u64) -> SimTime {
        SimTime::from_millis(ms)
    }

    #[test]
    fn one_event_makes_length_one() {
        let mut log = EventLog::new(2);
        log.record(Event::new(t(0), Source::Node(NodeId(0)), EventKind::ReadSkipped)).unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(log.counters().count("ReadSkipped"), 1);
    }

    #[test]
    fn equal_times_kept_in_order() {
        let mut log = EventLog::new(1);
        let a = Event::sized(t(5), Source::Router, EventKind::BytesWan, 1);
        let b = Event::sized(t(5), Source::Router, EventKind::BytesWan, 2);
        log.record(a).unwrap();
        log.record(b).unwrap();
        assert_eq!(log.events(), &[a, b]);
        assert_eq!(log.counters().bytes_of("BytesWAN"), 3);
    }

    #[test]
    fn same_source_regression_is_rejected() {
        let mut log = EventLog::new(2);
        log.record(Event::new(t(10), Source::Node(NodeId(1)), EventKind::ReadSkipped)).unwrap();
        // another source may lag
        log.record(Event::new(t(5), Source::Node(NodeId(0)), EventKind::ReadSkipped)).unwrap();
        let err = log.record(Event::new(t(9), Source::Node(NodeId(1)), EventKind::ReadSkipped));
        assert!(matches!(err, Err(MetricsError::OutOfOrder { .. })));
        assert_eq!(log.len(), 2);
    }

    #[test]
    fn line_format() {
        let e = Event::sized(t(1500), Source::Node(NodeId(3)), EventKind::StoreWriteOk { rows: 4 }, 300);
        assert_eq!(e.to_line(), "1500,n3,StoreWriteOk,300,rows=4");
        let e = Event::new(t(2), Source::Router, EventKind::PingRtt { rtt: SimDuration::from_millis(10), complete: true });
        assert_eq!(e.to_line(), "2,router,PingRTT,,rtt_ms=10;complete=1");
    }
}
