use std::collections::{BTreeMap, BTreeSet};
use std::num::NonZeroUsize;

use super::message::{FogMessage, MessageBody, RequestId};
use crate::cache::{make_key, resolve, CacheKey, CacheLine, CacheStore, NodeId};
use crate::time::{SimDuration, SimTime};
use crate::workload::KnownKeys;

#[derive(Clone, Copy, Debug)]
pub struct NodeParams {
    pub n_nodes: u32,
    pub cache_capacity: NonZeroUsize,
    /// How long a reader collects responses before deciding.
    pub response_window: SimDuration,
}

/// Side effects a handler asks the surrounding simulation to carry out.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    Broadcast(FogMessage),
    /// Hand a dirty line to the router's write queue.
    Persist(CacheLine),
    /// Fall back to a backing-store read after a fog miss.
    FetchFromStore { request_id: RequestId, key: CacheKey },
}

#[derive(Clone, Debug)]
pub struct PendingRead {
    pub request_id: RequestId,
    pub key: CacheKey,
    pub issued_at: SimTime,
    pub deadline: SimTime,
    pub responses: Vec<CacheLine>,
    request_bytes: u64,
    response_bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReadStart {
    LocalHit(CacheLine),
    Pending { request_id: RequestId, deadline: SimTime },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReadOutcome {
    FogHit(CacheLine),
    Miss,
}

/// A fog read that reached its deadline.
#[derive(Clone, Debug)]
pub struct FinishedRead {
    pub request_id: RequestId,
    pub key: CacheKey,
    pub issued_at: SimTime,
    pub responses: Vec<CacheLine>,
    pub outcome: ReadOutcome,
    /// Request plus collected responses, as encoded on the wire.
    pub lan_bytes: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PingSample {
    pub request_id: RequestId,
    pub started: SimTime,
    pub rtt: SimDuration,
    pub replies: u32,
    pub complete: bool,
}

#[derive(Clone, Debug)]
struct PingRound {
    started: SimTime,
    replied: BTreeSet<NodeId>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NodeStats {
    pub announces_received: u64,
    pub requests_answered: u64,
    pub orphan_responses: u64,
    pub dirty_evictions: u64,
}

/// One fog participant: its cache, its view of existing keys, and the
/// bookkeeping for reads and ping rounds in flight.
///
/// Handlers never talk to the network directly; they push [`Action`]s.
pub struct FogNode {
    id: NodeId,
    params: NodeParams,
    cache: CacheStore,
    known: KnownKeys,
    seq: u64,
    next_request: u64,
    pending_reads: BTreeMap<RequestId, PendingRead>,
    pending_pings: BTreeMap<RequestId, PingRound>,
    stats: NodeStats,
}

impl FogNode {
    pub fn new(id: NodeId, params: NodeParams) -> Self {
        FogNode {
            id,
            params,
            cache: CacheStore::new(params.cache_capacity),
            known: KnownKeys::default(),
            seq: 0,
            next_request: 0,
            pending_reads: BTreeMap::new(),
            pending_pings: BTreeMap::new(),
            stats: NodeStats::default(),
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn cache(&self) -> &CacheStore {
        &self.cache
    }

    pub fn known_keys(&self) -> &KnownKeys {
        &self.known
    }

    pub fn stats(&self) -> NodeStats {
        self.stats
    }

    pub fn pending_reads(&self) -> usize {
        self.pending_reads.len()
    }

    /// Records that a key exists without caching it.
    pub fn observe_key(&mut self, key: CacheKey) {
        self.known.observe(key);
    }

    fn next_request_id(&mut self) -> RequestId {
        let id = RequestId::new(self.id, self.next_request);
        self.next_request += 1;
        id
    }

    fn insert_local(&mut self, line: CacheLine, out: &mut Vec<Action>) {
        if let Some(evicted) = self.cache.insert(line) {
            if evicted.dirty {
                self.stats.dirty_evictions += 1;
                out.push(Action::Persist(evicted));
            }
        }
    }

    /// Mints a new line stamped `now` without touching cache or network.
    pub fn new_line(&mut self, payload: Vec<u8>, now: SimTime) -> CacheLine {
        let key = make_key(self.id, now, self.seq);
        self.seq += 1;
        CacheLine::generated(key, self.id, now, payload)
    }

    /// Generates a datum: cache it locally as dirty, announce it, and queue it
    /// for persistence.
    pub fn generate(&mut self, payload: Vec<u8>, now: SimTime, out: &mut Vec<Action>) -> CacheLine {
        let line = self.new_line(payload, now);
        self.publish(line.clone(), out);
        line
    }

    /// Rewrites an existing key with a fresh payload stamped `now`.
    pub fn update(&mut self, key: CacheKey, payload: Vec<u8>, now: SimTime, out: &mut Vec<Action>) -> CacheLine {
        let line = CacheLine::generated(key, self.id, now, payload);
        self.publish(line.clone(), out);
        line
    }

    fn publish(&mut self, line: CacheLine, out: &mut Vec<Action>) {
        self.known.observe(line.key);
        self.insert_local(line.clone(), out);
        let announce = CacheLine { dirty: false, ..line.clone() };
        out.push(Action::Broadcast(FogMessage::new(self.id, MessageBody::WriteAnnounce { line: announce })));
        out.push(Action::Persist(line));
    }

    /// A peer's write reached this node. The copy is clean; its origin persists it.
    pub fn on_write_announce(&mut self, line: &CacheLine, now: SimTime, out: &mut Vec<Action>) {
        self.stats.announces_received += 1;
        self.known.observe(line.key);
        self.insert_local(line.received_copy(now), out);
    }

    /// Starts a read: served locally if resident, otherwise asks the fog.
    pub fn begin_read(&mut self, key: CacheKey, now: SimTime, out: &mut Vec<Action>) -> ReadStart {
        if let Some(line) = self.cache.lookup(&key) {
            return ReadStart::LocalHit(line.clone());
        }
        let request_id = self.next_request_id();
        let msg = FogMessage::new(self.id, MessageBody::ReadRequest { request_id, key });
        let deadline = now + self.params.response_window;
        self.pending_reads.insert(
            request_id,
            PendingRead {
                request_id,
                key,
                issued_at: now,
                deadline,
                responses: Vec::new(),
                request_bytes: msg.encoded_len() as u64,
                response_bytes: 0,
            },
        );
        out.push(Action::Broadcast(msg));
        ReadStart::Pending { request_id, deadline }
    }

    /// Answers a peer's read if this node holds a valid copy. Silence otherwise.
    pub fn on_read_request(&mut self, request_id: RequestId, key: CacheKey, out: &mut Vec<Action>) {
        if request_id.requester() == self.id {
            return;
        }
        if let Some(line) = self.cache.peek(&key) {
            self.stats.requests_answered += 1;
            let line = CacheLine { dirty: false, ..line.clone() };
            out.push(Action::Broadcast(FogMessage::new(self.id, MessageBody::ReadResponse { request_id, line })));
        }
    }

    /// Collects a response addressed to one of this node's reads. Responses
    /// for other requesters are ignored; late or mismatched ones are counted
    /// as orphans and dropped.
    pub fn on_read_response(&mut self, request_id: RequestId, line: &CacheLine, wire_len: usize) {
        if request_id.requester() != self.id {
            return;
        }
        match self.pending_reads.get_mut(&request_id) {
            Some(pending) if pending.key == line.key => {
                pending.response_bytes += wire_len as u64;
                pending.responses.push(line.clone());
            }
            _ => self.stats.orphan_responses += 1,
        }
    }

    /// Closes a read at its deadline. The freshest response wins and is cached
    /// locally; no response at all is a miss and triggers a store fetch.
    pub fn finish_read(&mut self, request_id: RequestId, now: SimTime, out: &mut Vec<Action>) -> Option<FinishedRead> {
        let pending = self.pending_reads.remove(&request_id)?;
        debug_assert!(now >= pending.deadline);
        let outcome = match resolve(&pending.responses) {
            Ok(winner) => {
                let winner = winner.clone();
                self.known.observe(winner.key);
                self.insert_local(winner.received_copy(now), out);
                ReadOutcome::FogHit(winner)
            }
            Err(_) => {
                out.push(Action::FetchFromStore { request_id, key: pending.key });
                ReadOutcome::Miss
            }
        };
        Some(FinishedRead {
            request_id,
            key: pending.key,
            issued_at: pending.issued_at,
            lan_bytes: pending.request_bytes + pending.response_bytes,
            responses: pending.responses,
            outcome,
        })
    }

    /// Result of a backing-store fetch after a miss. Cached privately, not announced.
    pub fn on_store_fetch(&mut self, line: Option<&CacheLine>, now: SimTime, out: &mut Vec<Action>) {
        if let Some(line) = line {
            self.known.observe(line.key);
            self.insert_local(line.received_copy(now), out);
        }
    }

    /// The router confirmed that this version of `key` reached the store.
    pub fn on_persisted(&mut self, key: &CacheKey, data_timestamp: SimTime) -> bool {
        self.cache.mark_clean(key, data_timestamp)
    }

    /// Broadcasts a ping. `None` when the fog has no peers to answer.
    pub fn start_ping(&mut self, now: SimTime, out: &mut Vec<Action>) -> Option<RequestId> {
        if self.params.n_nodes < 2 {
            return None;
        }
        let request_id = self.next_request_id();
        self.pending_pings.insert(request_id, PingRound { started: now, replied: BTreeSet::new() });
        out.push(Action::Broadcast(FogMessage::new(self.id, MessageBody::Ping { request_id })));
        Some(request_id)
    }

    pub fn on_ping(&mut self, request_id: RequestId, out: &mut Vec<Action>) {
        if request_id.requester() != self.id {
            out.push(Action::Broadcast(FogMessage::new(self.id, MessageBody::PingReply { request_id })));
        }
    }

    /// Counts a reply; the round completes once every peer has answered.
    pub fn on_ping_reply(&mut self, request_id: RequestId, from: NodeId, now: SimTime) -> Option<PingSample> {
        let round = self.pending_pings.get_mut(&request_id)?;
        round.replied.insert(from);
        let replies = round.replied.len() as u32;
        if replies < self.params.n_nodes - 1 {
            return None;
        }
        let round = self.pending_pings.remove(&request_id)?;
        Some(PingSample { request_id, started: round.started, rtt: now - round.started, replies, complete: true })
    }

    /// Ends an unfinished ping round; the sample is marked incomplete.
    pub fn ping_timeout(&mut self, request_id: RequestId, now: SimTime) -> Option<PingSample> {
        let round = self.pending_pings.remove(&request_id)?;
        Some(PingSample {
            request_id,
            started: round.started,
            rtt: now - round.started,
            replies: round.replied.len() as u32,
            complete: false,
        })
    }

    /// Dispatches a delivered message. Returns a ping sample when a round completes.
    pub fn on_message(&mut self, msg: &FogMessage, now: SimTime, out: &mut Vec<Action>) -> Option<PingSample> {
        match &msg.body {
            MessageBody::WriteAnnounce { line } => self.on_write_announce(line, now, out),
            MessageBody::ReadRequest { request_id, key } => self.on_read_request(*request_id, *key, out),
            MessageBody::ReadResponse { request_id, line } => {
                self.on_read_response(*request_id, line, msg.encoded_len())
            }
            MessageBody::Ping { request_id } => self.on_ping(*request_id, out),
            MessageBody::PingReply { request_id } => return self.on_ping_reply(*request_id, msg.sender, now),
        }
        None
    }
}
