//! The simulation driver: wires nodes, medium, router and store to one
//! scheduler and logs everything that happens.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::backing::{ReadJob, Router, RouterCompletion, RouterPoll, RouterStats, SheetStore};
use crate::cache::{CacheKey, CacheLine, NodeId};
use crate::coherence::{Action, FogMessage, FogNode, MessageBody, NodeParams, PingSample, ReadOutcome, ReadStart, RequestId};
use crate::config::{ConfigError, ExperimentConfig};
use crate::metrics::{Event, EventKind, EventLog, MetricsError, Source};
use crate::netsim::{BroadcastMedium, NetsimError, Scheduler};
use crate::time::{SimDuration, SimTime};
use crate::workload::Workload;

const STREAM_MEDIUM: u64 = 1;
const STREAM_KEYS: u64 = 2;
const STREAM_PAYLOAD: u64 = 3;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Netsim(#[from] NetsimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Independent ChaCha8 stream `stream` under `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    /// Reads go through the fog; only misses reach the store.
    #[default]
    Cached,
    /// No fog cache: every read is a full-table store read and every write
    /// goes straight to the router.
    Baseline,
}

/// A fog read that reached its deadline, kept for post-run checks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReadRecord {
    pub node: NodeId,
    pub key: CacheKey,
    pub issued_at: SimTime,
    pub completed_at: SimTime,
    /// (responder origin, data timestamp) of every response collected.
    pub responses: Vec<(NodeId, SimTime)>,
    /// Data timestamp of the copy the reader kept; `None` on a miss.
    pub winner: Option<SimTime>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub mode: Mode,
    pub trace_reads: bool,
}

enum SimEvent {
    WriteTick { node: u32, k: u64 },
    ReadTick { node: u32, k: u64 },
    Deliver { to: NodeId, msg: Rc<FogMessage>, announce: Option<u64> },
    ReadDeadline { node: u32, request_id: RequestId },
    RouterWake,
    RouterDone,
    PingStart { round: u32 },
    PingTimeout { node: u32, request_id: RequestId },
}

/// Everything a finished run leaves behind.
pub struct RunOutput {
    pub log: EventLog,
    pub store: SheetStore,
    pub router: Router,
    pub nodes: Vec<FogNode>,
    pub end: SimTime,
    pub reads_scheduled: u64,
    /// Newest data timestamp generated for each key.
    pub generated: HashMap<CacheKey, SimTime>,
    pub reads: Vec<ReadRecord>,
    pub pings: Vec<PingSample>,
    /// Rows lost to store-side collisions.
    pub overwritten: Vec<CacheKey>,
}

impl RunOutput {
    pub fn router_stats(&self) -> RouterStats {
        self.router.stats()
    }
}

pub struct Simulation {
    opts: RunOptions,
    n: u32,
    nodes: Vec<FogNode>,
    medium: BroadcastMedium,
    sched: Scheduler<SimEvent>,
    store: SheetStore,
    router: Router,
    workload: Workload,
    log: EventLog,
    router_wake: Option<SimTime>,
    next_announce: u64,
    reads_scheduled: u64,
    generated: HashMap<CacheKey, SimTime>,
    reads: Vec<ReadRecord>,
    pings: Vec<PingSample>,
    overwritten: Vec<CacheKey>,
    ping_timeout: SimDuration,
    ping_rounds: u32,
    end: SimTime,
    actions: Vec<Action>,
}

impl Simulation {
    /// Builds a run of the configured workload.
    pub fn new(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Self, SimError> {
        cfg.validate()?;
        let mut sim = Self::build(cfg, opts)?;
        let (n, wl) = (sim.n, &sim.workload);
        if wl.writes_per_node() > 0 {
            for node in 0..n {
                sim.sched.schedule(wl.write_time(NodeId(node), n, 0), SimEvent::WriteTick { node, k: 0 });
            }
        }
        if wl.reads_per_node() > 0 {
            for node in 0..n {
                sim.sched.schedule(wl.read_time(NodeId(node), n, 0), SimEvent::ReadTick { node, k: 0 });
            }
        }
        // every read's deadline falls before this
        sim.end = SimTime::ZERO + wl.duration() + wl.read_period() + SimDuration::from_secs_f64(cfg.fog.response_window_s);
        Ok(sim)
    }

    /// Builds a latency probe: no workload, `fog.rtt_rounds` ping rounds
    /// issued one after another by nodes 0, 1, 2, ... in turn.
    pub fn rtt_probe(cfg: &ExperimentConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let mut sim = Self::build(cfg, RunOptions::default())?;
        sim.ping_rounds = cfg.fog.rtt_rounds;
        if sim.ping_rounds > 0 && sim.n >= 2 {
            sim.sched.schedule(SimTime::ZERO, SimEvent::PingStart { round: 0 });
        }
        sim.end = SimTime::ZERO + sim.ping_timeout * u64::from(sim.ping_rounds);
        Ok(sim)
    }

    fn build(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Self, SimError> {
        let f = &cfg.fog;
        let capacity = NonZeroUsize::new(f.cache_capacity).expect("validated");
        let params = NodeParams {
            n_nodes: f.n_nodes,
            cache_capacity: capacity,
            response_window: SimDuration::from_secs_f64(f.response_window_s),
        };
        let medium = BroadcastMedium::new(
            f.n_nodes,
            f.loss_probability,
            f.delay,
            f.delay_sampling,
            rng_stream(cfg.seed, STREAM_MEDIUM),
        )?;
        let workload = Workload::new(
            &cfg.workload,
            f.cache_capacity,
            rng_stream(cfg.seed, STREAM_KEYS),
            rng_stream(cfg.seed, STREAM_PAYLOAD),
        );
        Ok(Simulation {
            opts,
            n: f.n_nodes,
            nodes: (0..f.n_nodes).map(|i| FogNode::new(NodeId(i), params)).collect(),
            medium,
            sched: Scheduler::new(),
            store: SheetStore::new(cfg.store.clone()),
            router: Router::new(cfg.router.clone()),
            workload,
            log: EventLog::new(f.n_nodes),
            router_wake: None,
            next_announce: 0,
            reads_scheduled: 0,
            generated: HashMap::new(),
            reads: Vec::new(),
            pings: Vec::new(),
            overwritten: Vec::new(),
            ping_timeout: SimDuration::from_secs_f64(f.ping_timeout_s),
            ping_rounds: 0,
            end: SimTime::ZERO,
            actions: Vec::new(),
        })
    }

    pub fn end(&self) -> SimTime {
        self.end
    }

    pub fn medium(&self) -> &BroadcastMedium {
        &self.medium
    }

    /// Runs every event up to and including the end time.
    pub fn run(mut self) -> Result<RunOutput, SimError> {
        while let Some(at) = self.sched.peek_time() {
            if at > self.end {
                break;
            }
            let (now, event) = self.sched.pop().expect("peeked");
            self.handle(now, event)?;
        }
        Ok(RunOutput {
            log: self.log,
            store: self.store,
            router: self.router,
            nodes: self.nodes,
            end: self.end,
            reads_scheduled: self.reads_scheduled,
            generated: self.generated,
            reads: self.reads,
            pings: self.pings,
            overwritten: self.overwritten,
        })
    }

    fn record(&mut self, event: Event) -> Result<(), SimError> {
        self.log.record(event)?;
        Ok(())
    }

    fn handle(&mut self, now: SimTime, event: SimEvent) -> Result<(), SimError> {
        match event {
            SimEvent::WriteTick { node, k } => {
                self.on_write_tick(node, now)?;
                if k + 1 < self.workload.writes_per_node() {
                    let at = self.workload.write_time(NodeId(node), self.n, k + 1);
                    self.sched.schedule(at, SimEvent::WriteTick { node, k: k + 1 });
                }
            }
            SimEvent::ReadTick { node, k } => {
                self.on_read_tick(node, now)?;
                if k + 1 < self.workload.reads_per_node() {
                    let at = self.workload.read_time(NodeId(node), self.n, k + 1);
                    self.sched.schedule(at, SimEvent::ReadTick { node, k: k + 1 });
                }
            }
            SimEvent::Deliver { to, msg, announce } => {
                if let Some(announce) = announce {
                    self.record(Event::new(now, Source::Node(to), EventKind::AnnounceDelivered { announce }))?;
                }
                let mut out = std::mem::take(&mut self.actions);
                let sample = self.nodes[to.0 as usize].on_message(&msg, now, &mut out);
                if let Some(sample) = sample {
                    self.on_ping_sample(to, sample, now)?;
                }
                self.apply(to, &mut out, now)?;
                self.actions = out;
            }
            SimEvent::ReadDeadline { node, request_id } => self.on_read_deadline(node, request_id, now)?,
            SimEvent::RouterWake => {
                if self.router_wake == Some(now) {
                    self.router_wake = None;
                }
                self.kick_router(now)?;
            }
            SimEvent::RouterDone => self.on_router_done(now)?,
            SimEvent::PingStart { round } => {
                let node = round % self.n;
                let mut out = std::mem::take(&mut self.actions);
                if let Some(request_id) = self.nodes[node as usize].start_ping(now, &mut out) {
                    self.sched.schedule(now + self.ping_timeout, SimEvent::PingTimeout { node, request_id });
                }
                self.apply(NodeId(node), &mut out, now)?;
                self.actions = out;
                if round + 1 < self.ping_rounds {
                    self.sched.schedule(now + self.ping_timeout, SimEvent::PingStart { round: round + 1 });
                }
            }
            SimEvent::PingTimeout { node, request_id } => {
                if let Some(sample) = self.nodes[node as usize].ping_timeout(request_id, now) {
                    self.on_ping_sample(NodeId(node), sample, now)?;
                }
            }
        }
        Ok(())
    }

    fn on_ping_sample(&mut self, node: NodeId, sample: PingSample, now: SimTime) -> Result<(), SimError> {
        self.pings.push(sample);
        let kind = EventKind::PingRtt { rtt: sample.rtt, complete: sample.complete };
        self.record(Event::new(now, Source::Node(node), kind))
    }

    fn on_write_tick(&mut self, node: u32, now: SimTime) -> Result<(), SimError> {
        let id = NodeId(node);
        let payload = self.workload.payload();
        let mut out = std::mem::take(&mut self.actions);
        let line = match self.opts.mode {
            Mode::Cached => {
                let target = if self.workload.wants_update() {
                    self.workload.choose_key(self.nodes[node as usize].known_keys())
                } else {
                    None
                };
                let n = &mut self.nodes[node as usize];
                match target {
                    Some(key) => n.update(key, payload, now, &mut out),
                    None => n.generate(payload, now, &mut out),
                }
            }
            Mode::Baseline => {
                let line = self.nodes[node as usize].new_line(payload, now);
                // every node learns of the key so reads draw from the same population
                for n in &mut self.nodes {
                    n.observe_key(line.key);
                }
                out.push(Action::Persist(line.clone()));
                line
            }
        };
        self.generated.insert(line.key, line.data_timestamp);
        self.record(Event::new(now, Source::Node(id), EventKind::Generate { key: line.key }))?;
        self.apply(id, &mut out, now)?;
        self.actions = out;
        Ok(())
    }

    fn on_read_tick(&mut self, node: u32, now: SimTime) -> Result<(), SimError> {
        self.reads_scheduled += 1;
        let id = NodeId(node);
        let Some(key) = self.workload.choose_key(self.nodes[node as usize].known_keys()) else {
            return self.record(Event::new(now, Source::Node(id), EventKind::ReadSkipped));
        };
        match self.opts.mode {
            Mode::Cached => {
                let mut out = std::mem::take(&mut self.actions);
                match self.nodes[node as usize].begin_read(key, now, &mut out) {
                    ReadStart::LocalHit(line) => {
                        let kind = EventKind::ReadLocalHit { key };
                        self.record(Event::sized(now, Source::Node(id), kind, line.encoded_len() as u64))?;
                    }
                    ReadStart::Pending { request_id, deadline } => {
                        self.sched.schedule(deadline, SimEvent::ReadDeadline { node, request_id });
                    }
                }
                self.apply(id, &mut out, now)?;
                self.actions = out;
            }
            Mode::Baseline => {
                self.record(Event::new(now, Source::Node(id), EventKind::ReadMiss { key }))?;
                self.router.request_read(ReadJob { requester: None, key: Some(key), queued_at: now });
                self.kick_router(now)?;
            }
        }
        Ok(())
    }

    fn on_read_deadline(&mut self, node: u32, request_id: RequestId, now: SimTime) -> Result<(), SimError> {
        let id = NodeId(node);
        let mut out = std::mem::take(&mut self.actions);
        let Some(done) = self.nodes[node as usize].finish_read(request_id, now, &mut out) else {
            self.actions = out;
            return Ok(());
        };
        let winner = match &done.outcome {
            ReadOutcome::FogHit(line) => {
                let kind = EventKind::ReadFogHit { key: done.key, responses: done.responses.len() as u32 };
                self.record(Event::sized(now, Source::Node(id), kind, done.lan_bytes))?;
                Some(line.data_timestamp)
            }
            ReadOutcome::Miss => {
                self.record(Event::new(now, Source::Node(id), EventKind::ReadMiss { key: done.key }))?;
                None
            }
        };
        if self.opts.trace_reads {
            self.reads.push(ReadRecord {
                node: id,
                key: done.key,
                issued_at: done.issued_at,
                completed_at: now,
                responses: done.responses.iter().map(|l| (l.origin, l.data_timestamp)).collect(),
                winner,
            });
        }
        self.apply(id, &mut out, now)?;
        self.actions = out;
        Ok(())
    }

    /// Carries out the side effects a node's handler asked for. Drains `out`.
    fn apply(&mut self, node: NodeId, out: &mut Vec<Action>, now: SimTime) -> Result<(), SimError> {
        let mut touched_router = false;
        for action in out.drain(..) {
            match action {
                Action::Broadcast(msg) => self.broadcast(node, msg, now)?,
                Action::Persist(line) => {
                    self.enqueue(line);
                    touched_router = true;
                }
                Action::FetchFromStore { request_id, key } => {
                    self.router.request_read(ReadJob { requester: Some((node, request_id)), key: Some(key), queued_at: now });
                    touched_router = true;
                }
            }
        }
        if touched_router {
            self.kick_router(now)?;
        }
        Ok(())
    }

    /// Overflow drops are counted by the queue itself.
    fn enqueue(&mut self, line: CacheLine) {
        self.router.enqueue(line);
    }

    fn broadcast(&mut self, sender: NodeId, msg: FogMessage, now: SimTime) -> Result<(), SimError> {
        let outcome = self.medium.broadcast(now, sender, msg.encoded_len());
        self.record(Event::sized(now, Source::Node(sender), EventKind::BytesLan, outcome.charged_bytes))?;
        let announce = if matches!(msg.body, MessageBody::WriteAnnounce { .. }) {
            let a = self.next_announce;
            self.next_announce += 1;
            self.record(Event::new(now, Source::Node(sender), EventKind::AnnounceSent { announce: a }))?;
            for _ in &outcome.lost {
                self.record(Event::new(now, Source::Node(sender), EventKind::AnnounceLost { announce: a }))?;
            }
            Some(a)
        } else {
            None
        };
        let msg = Rc::new(msg);
        for d in outcome.deliveries {
            self.sched.schedule(d.at, SimEvent::Deliver { to: d.to, msg: Rc::clone(&msg), announce });
        }
        Ok(())
    }

    fn wake_router_at(&mut self, at: SimTime) {
        if self.router_wake.is_none_or(|w| at < w) {
            self.router_wake = Some(at);
            self.sched.schedule(at, SimEvent::RouterWake);
        }
    }

    fn kick_router(&mut self, now: SimTime) -> Result<(), SimError> {
        if self.router.is_busy() {
            return Ok(());
        }
        match self.router.poll(&mut self.store, now) {
            RouterPoll::Started { complete_at } => self.sched.schedule(complete_at, SimEvent::RouterDone),
            RouterPoll::RateLimited { retry_at, charged_bytes } => {
                self.record(Event::sized(now, Source::Router, EventKind::StoreRateLimited, charged_bytes))?;
                self.record(Event::sized(now, Source::Router, EventKind::BytesWan, charged_bytes))?;
                self.wake_router_at(retry_at);
            }
            RouterPoll::Sleep { until } => self.wake_router_at(until),
            RouterPoll::Idle => {}
        }
        Ok(())
    }

    fn on_router_done(&mut self, now: SimTime) -> Result<(), SimError> {
        match self.router.complete(&mut self.store, now) {
            RouterCompletion::Write { rows, bytes, overwritten, .. } => {
                let kind = EventKind::StoreWriteOk { rows: rows.len() as u32 };
                self.record(Event::sized(now, Source::Router, kind, bytes))?;
                self.record(Event::sized(now, Source::Router, EventKind::BytesWan, bytes))?;
                for row in &rows {
                    self.nodes[row.origin.0 as usize].on_persisted(&row.key, row.data_timestamp);
                }
                self.overwritten.extend(overwritten);
            }
            RouterCompletion::Read { job, line, bytes, .. } => {
                let kind = EventKind::StoreReadAll { found: line.is_some() };
                self.record(Event::sized(now, Source::Router, kind, bytes))?;
                self.record(Event::sized(now, Source::Router, EventKind::BytesWan, bytes))?;
                if let Some((node, _)) = job.requester {
                    let mut out = std::mem::take(&mut self.actions);
                    self.nodes[node.0 as usize].on_store_fetch(line.as_ref(), now, &mut out);
                    for action in out.drain(..) {
                        if let Action::Persist(line) = action {
                            self.enqueue(line);
                        }
                    }
                    self.actions = out;
                }
            }
        }
        let depth = self.router.queue_depth() as u64;
        self.record(Event::new(now, Source::Router, EventKind::QueueDepth { depth }))?;
        self.kick_router(now)
    }
}
