use super::key::{CacheKey, NodeId};
use super::CacheError;
use crate::time::SimTime;

/// Bytes of a serialized line excluding the payload:
/// key 16, valid 1, time_inserted 8, data_timestamp 8, origin 4, payload length 4.
pub const LINE_HEADER_LEN: usize = 16 + 1 + 8 + 8 + 4 + 4;

/// One cached datum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CacheLine {
    pub key: CacheKey,
    pub valid: bool,
    /// Local insertion time at the node holding this copy.
    pub time_inserted: SimTime,
    /// Generation time at the origin node.
    pub data_timestamp: SimTime,
    pub origin: NodeId,
    pub payload: Vec<u8>,
    /// Not yet confirmed persisted in the backing store. Never serialized.
    pub dirty: bool,
}

impl CacheLine {
    /// A fresh, valid line as it exists at its origin right after generation.
    pub fn generated(key: CacheKey, origin: NodeId, at: SimTime, payload: Vec<u8>) -> Self {
        CacheLine {
            key,
            valid: true,
            time_inserted: at,
            data_timestamp: at,
            origin,
            payload,
            dirty: true,
        }
    }

    /// Copy of this line as received by another holder at `now`.
    pub fn received_copy(&self, now: SimTime) -> Self {
        debug_assert!(self.data_timestamp <= now);
        CacheLine {
            time_inserted: now,
            dirty: false,
            ..self.clone()
        }
    }

    pub fn encoded_len(&self) -> usize {
        LINE_HEADER_LEN + self.payload.len()
    }

    /// Appends the canonical big-endian encoding of this line to `buf`.
    pub fn encode_into(&self, buf: &mut Vec<u8>) {
        buf.reserve(self.encoded_len());
        buf.extend_from_slice(&self.key.to_be_bytes());
        buf.push(u8::from(self.valid));
        buf.extend_from_slice(&self.time_inserted.as_millis().to_be_bytes());
        buf.extend_from_slice(&self.data_timestamp.as_millis().to_be_bytes());
        buf.extend_from_slice(&self.origin.0.to_be_bytes());
        let len = u32::try_from(self.payload.len()).expect("payload longer than u32::MAX");
        buf.extend_from_slice(&len.to_be_bytes());
        buf.extend_from_slice(&self.payload);
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.encoded_len());
        self.encode_into(&mut buf);
        buf
    }

    /// Decodes one line from the front of `bytes`, returning it and the
    /// number of bytes consumed. Decoded lines are clean.
    pub fn decode(bytes: &[u8]) -> Result<(CacheLine, usize), CacheError> {
        if bytes.len() < LINE_HEADER_LEN {
            return Err(CacheError::Truncated { needed: LINE_HEADER_LEN, got: bytes.len() });
        }
        let key = CacheKey::from_be_bytes(bytes[0..16].try_into().unwrap());
        let valid = match bytes[16] {
            0 => false,
            1 => true,
            other => return Err(CacheError::BadValidFlag(other)),
        };
        let time_inserted = SimTime::from_millis(u64::from_be_bytes(bytes[17..25].try_into().unwrap()));
        let data_timestamp = SimTime::from_millis(u64::from_be_bytes(bytes[25..33].try_into().unwrap()));
        let origin = NodeId(u32::from_be_bytes(bytes[33..37].try_into().unwrap()));
        let len = u32::from_be_bytes(bytes[37..41].try_into().unwrap()) as usize;
        let end = LINE_HEADER_LEN + len;
        if bytes.len() < end {
            return Err(CacheError::Truncated { needed: end, got: bytes.len() });
        }
        let line = CacheLine {
            key,
            valid,
            time_inserted,
            data_timestamp,
            origin,
            payload: bytes[LINE_HEADER_LEN..end].to_vec(),
            dirty: false,
        };
        Ok((line, end))
    }
}
