//! Deterministic discrete-event driver for a Kademlia overlay.
//!
//! Events are ordered by `(time, tick rank, sequence number)`, and every random draw
//! comes from one of two ChaCha streams seeded from the scenario seed, so a
//! scenario and seed fully determine the snapshot stream.
//!
//! Phases: joins spread uniformly over the first [`SETUP_MINUTES`], then
//! stabilization, then churn from [`CHURN_START_MINUTES`] to the end of the run.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::hash::{BuildHasherDefault, Hasher};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Churn, Loss, ScenarioConfig};
use crate::error::ConfigError;
use crate::id::NodeId;
use crate::protocol::{Action, Message, Node, OpId, OpResult, ProtocolParams, Purpose, RequestId};
use crate::snapshot::Snapshot;
use crate::time::{SimTime, MICROS_PER_MIN};

pub const SETUP_MINUTES: u64 = 30;
pub const CHURN_START_MINUTES: u64 = 120;
pub const REFRESH_MINUTES: u64 = 60;
pub const LOOKUPS_PER_MINUTE: usize = 10;
pub const DISSEMINATIONS_PER_MINUTE: usize = 1;
/// A request without a response after this long counts as failed.
pub const REQUEST_TIMEOUT: SimTime = SimTime(10_000_000);
/// One-way latency bounds, microseconds inclusive.
pub const LATENCY_MIN_US: u64 = 50_000;
pub const LATENCY_MAX_US: u64 = 200_000;

#[derive(Clone, Debug)]
enum EventKind {
    /// `request_sent` is when the request (or the request this replies to) left its sender.
    Deliver { msg: Box<Message>, request_sent: SimTime },
    Timeout { node: NodeId, request: RequestId },
    Join,
    Leave,
    ChurnTick(u64),
    TrafficTick(u64),
    Lookup(NodeId),
    Disseminate(NodeId),
    Refresh(NodeId),
    SnapshotTick,
}

impl EventKind {
    /// Tie-break among events due at the same instant: phase ticks first, in a
    /// fixed order, so the schedule does not depend on when a tick was queued.
    fn rank(&self) -> u8 {
        match self {
            EventKind::ChurnTick(_) => 0,
            EventKind::TrafficTick(_) => 1,
            EventKind::SnapshotTick => 2,
            _ => 3,
        }
    }
}

#[derive(Clone, Debug)]
struct Scheduled {
    at: SimTime,
    rank: u8,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.rank == other.rank && self.seq == other.seq
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.at, self.rank, self.seq).cmp(&(other.at, other.rank, other.seq))
    }
}

/// Multiply-rotate hasher for node ids, which are uniformly random already.
#[derive(Default)]
struct IdHasher(u64);

impl IdHasher {
    #[inline]
    fn mix(&mut self, word: u64) {
        self.0 = (self.0.rotate_left(5) ^ word).wrapping_mul(0x517c_c1b7_2722_0a95);
    }
}

impl Hasher for IdHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for chunk in bytes.chunks(8) {
            let mut word = [0u8; 8];
            word[..chunk.len()].copy_from_slice(chunk);
            self.mix(u64::from_le_bytes(word));
        }
    }

    fn write_u64(&mut self, n: u64) {
        self.mix(n);
    }

    fn write_usize(&mut self, n: usize) {
        self.mix(n as u64);
    }
}

/// Whether a one-way message survives the channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Delivery {
    Delivered,
    Dropped,
}

pub fn apply_loss<R: Rng + ?Sized>(loss: Loss, rng: &mut R) -> Delivery {
    let p = loss.one_way();
    if p > 0.0 && rng.gen_bool(p) {
        Delivery::Dropped
    } else {
        Delivery::Delivered
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SimStats {
    pub events: u64,
    pub messages_sent: u64,
    pub messages_dropped: u64,
    pub requests_failed: u64,
    pub lookups_finished: u64,
    pub disseminations_finished: u64,
    pub stores_acked: u64,
    pub joins: u64,
    pub leaves: u64,
    pub snapshots: u64,
}

/// A running simulation. Build with [`Simulation::new`] for a full scenario
/// or [`Simulation::manual`] to script nodes and operations by hand.
#[derive(Clone)]
pub struct Simulation {
    config: ScenarioConfig,
    params: ProtocolParams,
    now: SimTime,
    end: SimTime,
    seq: u64,
    queue: BinaryHeap<Reverse<Scheduled>>,
    nodes: HashMap<NodeId, Node, BuildHasherDefault<IdHasher>>,
    /// Sorted ids of live nodes.
    alive: Vec<NodeId>,
    rng: ChaCha8Rng,
    net_rng: ChaCha8Rng,
    stats: SimStats,
    tracked: BTreeMap<(NodeId, OpId), Option<OpResult>>,
    ready: Vec<Snapshot>,
    tag: String,
    actions: Vec<Action>,
}

impl Simulation {
    /// Schedules the setup joins and every periodic tick of the scenario.
    pub fn new(config: ScenarioConfig) -> Result<Simulation, ConfigError> {
        let mut sim = Simulation::manual(config)?;
        // Runs shorter than the setup phase compress it into the run.
        let setup = (SETUP_MINUTES * MICROS_PER_MIN).min(sim.end.micros()).max(1);
        let mut joins: Vec<SimTime> = (0..sim.config.size).map(|_| SimTime(sim.rng.gen_range(0..setup))).collect();
        joins.sort();
        for at in joins {
            sim.schedule(at, EventKind::Join);
        }
        sim.schedule(SimTime::ZERO, EventKind::SnapshotTick);
        if sim.config.traffic {
            sim.schedule(SimTime::ZERO, EventKind::TrafficTick(0));
        }
        if sim.config.churn.is_active() && CHURN_START_MINUTES * MICROS_PER_MIN < sim.end.micros() {
            sim.schedule(SimTime::from_minutes(CHURN_START_MINUTES), EventKind::ChurnTick(CHURN_START_MINUTES));
        }
        Ok(sim)
    }

    /// An empty network with nothing scheduled.
    pub fn manual(config: ScenarioConfig) -> Result<Simulation, ConfigError> {
        config.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut net_rng = ChaCha8Rng::seed_from_u64(config.seed);
        net_rng.set_stream(1);
        Ok(Simulation {
            params: config.protocol(),
            end: SimTime::from_minutes_f64(config.duration),
            tag: config.tag(),
            config,
            now: SimTime::ZERO,
            seq: 0,
            queue: BinaryHeap::new(),
            nodes: HashMap::default(),
            alive: Vec::new(),
            rng,
            net_rng,
            stats: SimStats::default(),
            tracked: BTreeMap::new(),
            ready: Vec::new(),
            actions: Vec::new(),
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn end(&self) -> SimTime {
        self.end
    }

    pub fn stats(&self) -> &SimStats {
        &self.stats
    }

    pub fn alive_ids(&self) -> &[NodeId] {
        &self.alive
    }

    pub fn alive_count(&self) -> usize {
        self.alive.len()
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn node_mut(&mut self, id: &NodeId) -> Option<&mut Node> {
        self.nodes.get_mut(id)
    }

    pub fn is_finished(&self) -> bool {
        self.queue.peek().is_none_or(|Reverse(e)| e.at > self.end)
    }

    /// Runs to the end, handing each snapshot to `sink` as it is taken.
    pub fn run(mut self, mut sink: impl FnMut(Snapshot)) -> SimStats {
        let end = self.end;
        while self.step_until(end) {
            for snap in self.ready.drain(..) {
                sink(snap);
            }
        }
        for snap in self.ready.drain(..) {
            sink(snap);
        }
        self.stats
    }

    pub fn run_collect(config: ScenarioConfig) -> Result<Vec<Snapshot>, ConfigError> {
        let mut snaps = Vec::new();
        Simulation::new(config)?.run(|s| snaps.push(s));
        Ok(snaps)
    }

    /// Processes every event up to and including `until`; returns snapshots taken.
    pub fn run_until(&mut self, until: SimTime) -> Vec<Snapshot> {
        while self.step_until(until) {}
        if self.now < until {
            self.now = until;
        }
        std::mem::take(&mut self.ready)
    }

    fn step_until(&mut self, until: SimTime) -> bool {
        match self.queue.peek() {
            Some(Reverse(e)) if e.at <= until && e.at <= self.end.max(until) => {}
            _ => return false,
        }
        let Reverse(event) = self.queue.pop().expect("peeked");
        debug_assert!(event.at >= self.now, "clock went backwards");
        self.now = event.at;
        self.stats.events += 1;
        self.process(event.kind);
        true
    }

    fn schedule(&mut self, at: SimTime, kind: EventKind) {
        debug_assert!(at >= self.now);
        self.seq += 1;
        self.queue.push(Reverse(Scheduled { at, rank: kind.rank(), seq: self.seq, kind }));
    }

    fn within_minute(&mut self, minute: u64) -> SimTime {
        SimTime(minute * MICROS_PER_MIN + self.rng.gen_range(0..MICROS_PER_MIN))
    }

    fn process(&mut self, kind: EventKind) {
        match kind {
            EventKind::Deliver { msg, request_sent } => self.deliver(*msg, request_sent),
            EventKind::Timeout { node, request } => {
                if let Some(n) = self.nodes.get_mut(&node) {
                    self.stats.requests_failed += 1;
                    let mut out = std::mem::take(&mut self.actions);
                    n.on_timeout(request, self.now, &mut out);
                    self.dispatch(node, out, self.now);
                }
            }
            EventKind::Join => {
                self.join_random();
            }
            EventKind::Leave => {
                if !self.alive.is_empty() {
                    let victim = self.alive[self.rng.gen_range(0..self.alive.len())];
                    self.remove_node(&victim);
                }
            }
            EventKind::ChurnTick(minute) => self.churn_step(minute),
            EventKind::TrafficTick(minute) => self.traffic_step(minute),
            EventKind::Lookup(id) => {
                if self.nodes.contains_key(&id) {
                    let target = NodeId::random(&mut self.rng, self.config.b).expect("validated width");
                    self.start_op(id, |n, now, out| n.start_lookup(target, Purpose::Lookup, now, out));
                }
            }
            EventKind::Disseminate(id) => {
                if self.nodes.contains_key(&id) {
                    let key = NodeId::random(&mut self.rng, self.config.b).expect("validated width");
                    let payload = key.low_u64().to_le_bytes().to_vec();
                    self.start_op(id, |n, now, out| n.start_dissemination(key, payload, now, out));
                }
            }
            EventKind::Refresh(id) => {
                if self.nodes.contains_key(&id) {
                    self.refresh(&id);
                    self.schedule(self.now + SimTime::from_minutes(REFRESH_MINUTES), EventKind::Refresh(id));
                }
            }
            EventKind::SnapshotTick => {
                let snap = self.take_snapshot();
                self.ready.push(snap);
                let next = self.now + SimTime::from_minutes_f64(self.config.snapshot_interval);
                if next <= self.end {
                    self.schedule(next, EventKind::SnapshotTick);
                }
            }
        }
    }

    /// Schedules this minute's removals and additions at uniform times in
    /// `[minute, minute + 1)`, then the next tick.
    fn churn_step(&mut self, minute: u64) {
        for _ in 0..self.config.churn.removals() {
            let at = self.within_minute(minute);
            self.schedule(at, EventKind::Leave);
        }
        for _ in 0..self.config.churn.additions() {
            let at = self.within_minute(minute);
            self.schedule(at, EventKind::Join);
        }
        let next = SimTime::from_minutes(minute + 1);
        if next < self.end {
            self.schedule(next, EventKind::ChurnTick(minute + 1));
        }
    }

    fn traffic_step(&mut self, minute: u64) {
        let ids = self.alive.clone();
        for id in ids {
            for _ in 0..LOOKUPS_PER_MINUTE {
                let at = self.within_minute(minute);
                self.schedule(at, EventKind::Lookup(id));
            }
            for _ in 0..DISSEMINATIONS_PER_MINUTE {
                let at = self.within_minute(minute);
                self.schedule(at, EventKind::Disseminate(id));
            }
        }
        let next = SimTime::from_minutes(minute + 1);
        if next < self.end {
            self.schedule(next, EventKind::TrafficTick(minute + 1));
        }
    }

    fn start_op(&mut self, id: NodeId, f: impl FnOnce(&mut Node, SimTime, &mut Vec<Action>) -> OpId) -> Option<OpId> {
        let now = self.now;
        let mut out = std::mem::take(&mut self.actions);
        let node = self.nodes.get_mut(&id)?;
        let op = f(node, now, &mut out);
        self.dispatch(id, out, now);
        Some(op)
    }

    /// Routes a node's actions: sends go through the channel, finished operations are counted.
    fn dispatch(&mut self, origin: NodeId, mut out: Vec<Action>, request_sent: SimTime) {
        for action in out.drain(..) {
            match action {
                Action::Send(msg) => self.transmit(msg, request_sent),
                Action::Finished { op, result } => {
                    match &result {
                        OpResult::Found(_) => self.stats.lookups_finished += 1,
                        OpResult::Stored(n) => {
                            self.stats.disseminations_finished += 1;
                            self.stats.stores_acked += *n as u64;
                        }
                    }
                    if let Some(slot) = self.tracked.get_mut(&(origin, op)) {
                        *slot = Some(result);
                    }
                }
            }
        }
        self.actions = out;
    }

    fn transmit(&mut self, msg: Message, reply_to_sent: SimTime) {
        self.stats.messages_sent += 1;
        let is_request = msg.body.is_request();
        let request_sent = if is_request { self.now } else { reply_to_sent };
        match apply_loss(self.config.loss, &mut self.net_rng) {
            Delivery::Dropped => {
                self.stats.messages_dropped += 1;
                // The requester only learns of the loss by timing out.
                let (node, request) = if is_request { (msg.from, msg.request_id) } else { (msg.to, msg.request_id) };
                self.schedule(request_sent + REQUEST_TIMEOUT, EventKind::Timeout { node, request });
            }
            Delivery::Delivered => {
                let latency = SimTime(self.net_rng.gen_range(LATENCY_MIN_US..=LATENCY_MAX_US));
                self.schedule(self.now + latency, EventKind::Deliver { msg: Box::new(msg), request_sent });
            }
        }
    }

    fn deliver(&mut self, msg: Message, request_sent: SimTime) {
        let to = msg.to;
        let Some(node) = self.nodes.get_mut(&to) else {
            if msg.body.is_request() {
                self.schedule(request_sent + REQUEST_TIMEOUT, EventKind::Timeout { node: msg.from, request: msg.request_id });
            }
            return;
        };
        let mut out = std::mem::take(&mut self.actions);
        node.handle_message(msg, self.now, &mut out);
        self.dispatch(to, out, request_sent);
    }

    fn fresh_id(&mut self) -> NodeId {
        loop {
            let id = NodeId::random(&mut self.rng, self.config.b).expect("validated width");
            if !self.nodes.contains_key(&id) {
                return id;
            }
        }
    }

    /// Joins a node with a fresh id through a uniformly chosen live node.
    pub fn join_random(&mut self) -> NodeId {
        let id = self.fresh_id();
        let seed = if self.alive.is_empty() {
            None
        } else {
            Some(self.alive[self.rng.gen_range(0..self.alive.len())])
        };
        self.add_node(id, seed);
        id
    }

    /// Adds node `id`, bootstrapping through `seed`, and schedules its refreshes.
    pub fn add_node(&mut self, id: NodeId, seed: Option<NodeId>) {
        assert!(!self.nodes.contains_key(&id), "id already live");
        self.stats.joins += 1;
        let pos = self.alive.binary_search(&id).unwrap_err();
        self.alive.insert(pos, id);
        self.nodes.insert(id, Node::new(id, self.params));
        let seed = seed.filter(|s| self.nodes.contains_key(s));
        self.start_op(id, |n, now, out| n.bootstrap(seed, now, out).unwrap_or(OpId(u64::MAX)));
        self.schedule(self.now + SimTime::from_minutes(REFRESH_MINUTES), EventKind::Refresh(id));
    }

    /// Silent departure.
    pub fn remove_node(&mut self, id: &NodeId) -> bool {
        let Some(mut node) = self.nodes.remove(id) else {
            return false;
        };
        node.kill();
        if let Ok(pos) = self.alive.binary_search(id) {
            self.alive.remove(pos);
        }
        self.stats.leaves += 1;
        true
    }

    /// Starts a lookup whose result can be read back with [`Simulation::outcome`].
    pub fn start_lookup(&mut self, id: NodeId, target: NodeId) -> Option<OpId> {
        let op = self.start_op_tracked(id, |n, now, out| n.start_lookup(target, Purpose::Lookup, now, out))?;
        Some(op)
    }

    pub fn start_dissemination(&mut self, id: NodeId, key: NodeId, payload: Vec<u8>) -> Option<OpId> {
        self.start_op_tracked(id, |n, now, out| n.start_dissemination(key, payload, now, out))
    }

    fn start_op_tracked(
        &mut self,
        id: NodeId,
        f: impl FnOnce(&mut Node, SimTime, &mut Vec<Action>) -> OpId,
    ) -> Option<OpId> {
        let now = self.now;
        let mut out = std::mem::take(&mut self.actions);
        let node = self.nodes.get_mut(&id)?;
        let op = f(node, now, &mut out);
        self.tracked.insert((id, op), None);
        self.dispatch(id, out, now);
        Some(op)
    }

    pub fn outcome(&self, node: NodeId, op: OpId) -> Option<&OpResult> {
        self.tracked.get(&(node, op)).and_then(Option::as_ref)
    }

    /// Runs one bucket refresh on `id` now.
    pub fn refresh(&mut self, id: &NodeId) {
        let now = self.now;
        let mut out = std::mem::take(&mut self.actions);
        if let Some(node) = self.nodes.get_mut(id) {
            node.bucket_refresh(&mut self.rng, now, &mut out);
        }
        self.dispatch(*id, out, now);
    }

    /// Switches a churn-free run to `churn` before the churn phase begins.
    ///
    /// Until the churn phase nothing fails in a loss-free run, so a clone run
    /// to just before it and then switched produces the same snapshots as a
    /// fresh run with `churn` configured; this lets several churn settings
    /// share one setup and stabilization prefix.
    pub fn start_churn(&mut self, churn: Churn) -> Result<(), ConfigError> {
        let start = SimTime::from_minutes(CHURN_START_MINUTES);
        if self.config.churn.is_active() {
            return Err(ConfigError::Invalid("churn already configured".into()));
        }
        if !churn.is_active() {
            return Err(ConfigError::Invalid("churn `none` cannot be started".into()));
        }
        if self.now >= start {
            return Err(ConfigError::Invalid(format!("churn must be started before minute {CHURN_START_MINUTES}")));
        }
        if self.stats.requests_failed > 0 {
            return Err(ConfigError::Invalid("requests already failed; staleness would matter".into()));
        }
        self.config.churn = churn;
        self.params = self.config.protocol();
        self.tag = self.config.tag();
        for node in self.nodes.values_mut() {
            node.set_staleness(self.params.staleness);
        }
        if start < self.end {
            self.schedule(start, EventKind::ChurnTick(CHURN_START_MINUTES));
        }
        Ok(())
    }

    /// Copies every live node's contacts. Entries naming departed nodes are kept.
    pub fn take_snapshot(&mut self) -> Snapshot {
        self.stats.snapshots += 1;
        let mut snap = Snapshot::new(self.now, self.config.b);
        snap.config_echo = self.tag.clone();
        for id in &self.alive {
            let mut contacts = self.nodes[id].table().dump_contacts();
            contacts.sort();
            snap.entries.insert(*id, contacts);
        }
        snap
    }
}
