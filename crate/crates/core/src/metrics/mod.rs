//! Event log, run reports and the per-experiment CSV files.

mod event;
mod export;
mod report;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::time::SimTime;

pub use event::{Counters, Event, EventKind, EventLog, Source, KIND_COUNT, KIND_NAMES};
pub use export::{
    export_csv, fmt_f64, to_csv_string, BandwidthRow, CsvRow, MissRatioRow, RttRow, TxSizeRow,
};
pub use report::{report, steady_state_window, MetricsReport, RttStats};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("event from {emitter} at {at} precedes its previous event at {last}")]
    OutOfOrder { emitter: String, at: SimTime, last: SimTime },
    #[error("event log is empty")]
    EmptyLog,
    #[error("no events in window [{start}, {end}]")]
    EmptyWindow { start: SimTime, end: SimTime },
    #[error("window start {start} is after its end {end}")]
    BadWindow { start: SimTime, end: SimTime },
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl PartialEq for MetricsError {
    fn eq(&self, other: &Self) -> bool {
        use MetricsError::*;
        match (self, other) {
            (OutOfOrder { emitter: a, at: b, last: c }, OutOfOrder { emitter: x, at: y, last: z }) => {
                a == x && b == y && c == z
            }
            (EmptyLog, EmptyLog) => true,
            (EmptyWindow { start: a, end: b }, EmptyWindow { start: x, end: y }) => a == x && b == y,
            (BadWindow { start: a, end: b }, BadWindow { start: x, end: y }) => a == x && b == y,
            (Io { path: a, .. }, Io { path: x, .. }) => a == x,
            _ => false,
        }
    }
}
