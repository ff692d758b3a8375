use std::fmt;

use crate::cache::{CacheError, CacheKey, CacheLine, NodeId};

/// Request identifier, unique per requester within a run.
///
/// The requester id occupies the upper 24 bits, so a node hearing a
/// broadcast response can tell whether it asked the question.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RequestId(u64);

const REQUESTER_SHIFT: u32 = 40;

impl RequestId {
    pub fn new(requester: NodeId, counter: u64) -> Self {
        assert!(counter < 1 << REQUESTER_SHIFT, "request counter overflow");
        assert!(requester.0 < 1 << 24, "node id too large for request ids");
        RequestId(u64::from(requester.0) << REQUESTER_SHIFT | counter)
    }

    pub fn requester(self) -> NodeId {
        NodeId((self.0 >> REQUESTER_SHIFT) as u32)
    }

    pub const fn as_u64(self) -> u64 {
        self.0
    }

    pub const fn from_u64(v: u64) -> Self {
        RequestId(v)
    }
}

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.requester(), self.0 & ((1 << REQUESTER_SHIFT) - 1))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MessageBody {
    WriteAnnounce { line: CacheLine },
    ReadRequest { request_id: RequestId, key: CacheKey },
    ReadResponse { request_id: RequestId, line: CacheLine },
    Ping { request_id: RequestId },
    PingReply { request_id: RequestId },
}

impl MessageBody {
    fn tag(&self) -> u8 {
        match self {
            MessageBody::WriteAnnounce { .. } => 1,
            MessageBody::ReadRequest { .. } => 2,
            MessageBody::ReadResponse { .. } => 3,
            MessageBody::Ping { .. } => 4,
            MessageBody::PingReply { .. } => 5,
        }
    }
}

/// A message on the fog's broadcast medium.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FogMessage {
    pub sender: NodeId,
    pub body: MessageBody,
}

/// Tag byte plus sender id.
const ENVELOPE_LEN: usize = 1 + 4;

impl FogMessage {
    pub fn new(sender: NodeId, body: MessageBody) -> Self {
        FogMessage { sender, body }
    }

    pub fn encoded_len(&self) -> usize {
        ENVELOPE_LEN
            + match &self.body {
                MessageBody::WriteAnnounce { line } => line.encoded_len(),
                MessageBody::ReadRequest { .. } => 8 + 16,
                MessageBody::ReadResponse { line, .. } => 8 + line.encoded_len(),
                MessageBody::Ping { .. } | MessageBody::PingReply { .. } => 8,
            }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.encoded_len());
        buf.push(self.body.tag());
        buf.extend_from_slice(&self.sender.0.to_be_bytes());
        match &self.body {
            MessageBody::WriteAnnounce { line } => line.encode_into(&mut buf),
            MessageBody::ReadRequest { request_id, key } => {
                buf.extend_from_slice(&request_id.0.to_be_bytes());
                buf.extend_from_slice(&key.to_be_bytes());
            }
            MessageBody::ReadResponse { request_id, line } => {
                buf.extend_from_slice(&request_id.0.to_be_bytes());
                line.encode_into(&mut buf);
            }
            MessageBody::Ping { request_id } | MessageBody::PingReply { request_id } => {
                buf.extend_from_slice(&request_id.0.to_be_bytes());
            }
        }
        buf
    }

    pub fn decode(bytes: &[u8]) -> Result<FogMessage, CacheError> {
        let need = |n: usize| {
            if bytes.len() < n {
                Err(CacheError::Truncated { needed: n, got: bytes.len() })
            } else {
                Ok(())
            }
        };
        need(ENVELOPE_LEN)?;
        let tag = bytes[0];
        let sender = NodeId(u32::from_be_bytes(bytes[1..5].try_into().unwrap()));
        let rest = &bytes[ENVELOPE_LEN..];
        let request_id = |rest: &[u8]| RequestId(u64::from_be_bytes(rest[..8].try_into().unwrap()));
        let body = match tag {
            1 => MessageBody::WriteAnnounce { line: CacheLine::decode(rest)?.0 },
            2 => {
                need(ENVELOPE_LEN + 24)?;
                MessageBody::ReadRequest {
                    request_id: request_id(rest),
                    key: CacheKey::from_be_bytes(rest[8..24].try_into().unwrap()),
                }
            }
            3 => {
                need(ENVELOPE_LEN + 8)?;
                MessageBody::ReadResponse {
                    request_id: request_id(rest),
                    line: CacheLine::decode(&rest[8..])?.0,
                }
            }
            4 | 5 => {
                need(ENVELOPE_LEN + 8)?;
                let request_id = request_id(rest);
                if tag == 4 {
                    MessageBody::Ping { request_id }
                } else {
                    MessageBody::PingReply { request_id }
                }
            }
            other => return Err(CacheError::UnknownMessageTag(other)),
        };
        Ok(FogMessage { sender, body })
    }
}
