//! Mock spreadsheet backing store and the single queued writer that fronts it.

mod backoff;
mod router;
mod sheet;

use thiserror::Error;

use crate::time::SimTime;

pub use backoff::Backoff;
pub use router::{
    EnqueueOutcome, ReadJob, Router, RouterCompletion, RouterConfig, RouterPoll, RouterStats, WriteQueue,
};
pub use sheet::{CallKind, CallRecord, CommitReport, PendingWrite, SheetStore, StoreConfig, TableRead};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum StoreError {
    #[error("store call at {at} rejected: rate limit reached")]
    RateLimited { at: SimTime },
}
