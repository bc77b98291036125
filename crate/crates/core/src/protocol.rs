//! Kademlia node state machine.
//!
//! A [`Node`] never touches a clock or a network. Every entry point takes the
//! current simulated time and appends [`Action`]s to an output buffer: messages
//! to send and finished operations. The driver owns delivery, loss and
//! timeouts, and reports a lost request back through [`Node::on_timeout`].

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::id::{Distance, NodeId};
use crate::routing::{FailureOutcome, InsertOutcome, RoutingTable};
use crate::time::SimTime;

/// Hard cap on requests per lookup, in units of `k`.
pub const LOOKUP_BUDGET_PER_K: usize = 20;
/// Shortlist capacity, in units of `k`.
pub const SHORTLIST_PER_K: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProtocolParams {
    pub k: usize,
    pub alpha: usize,
    /// Consecutive failures before a contact is dropped.
    pub staleness: u32,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams { k: 20, alpha: 3, staleness: 5 }
    }
}

/// Request token, unique per requesting node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RequestId(pub u64);

/// Handle for a lookup or dissemination started on a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OpId(pub u64);

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Body {
    FindNodeReq { target: NodeId },
    FindNodeResp { contacts: Vec<NodeId> },
    StoreReq { key: NodeId, payload: Vec<u8> },
    StoreResp,
    PingReq,
    PingResp,
}

impl Body {
    pub fn is_request(&self) -> bool {
        matches!(self, Body::FindNodeReq { .. } | Body::StoreReq { .. } | Body::PingReq)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub from: NodeId,
    pub to: NodeId,
    pub request_id: RequestId,
    pub body: Body,
}

/// Why a lookup was started.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Purpose {
    Lookup,
    Join,
    Refresh,
    Disseminate { payload: Vec<u8> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OpResult {
    /// Responding nodes, closest first, at most `k`.
    Found(Vec<NodeId>),
    /// Number of acknowledged stores.
    Stored(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    Send(Message),
    Finished { op: OpId, result: OpResult },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CandidateStatus {
    Unqueried,
    Inflight,
    Responded,
    Failed,
}

#[derive(Clone, Debug)]
struct Candidate {
    /// Distance to the lookup target; the id is `target ^ dist`.
    dist: Distance,
    status: CandidateStatus,
}

/// Progress of one iterative lookup.
#[derive(Clone, Debug)]
pub struct LookupState {
    target: NodeId,
    purpose: Purpose,
    /// Ascending by distance to `target`.
    shortlist: Vec<Candidate>,
    inflight: usize,
    sent: usize,
}

impl LookupState {
    pub fn target(&self) -> NodeId {
        self.target
    }

    pub fn inflight(&self) -> usize {
        self.inflight
    }

    pub fn requests_sent(&self) -> usize {
        self.sent
    }

    pub fn candidates(&self) -> impl Iterator<Item = (NodeId, CandidateStatus)> + '_ {
        self.shortlist.iter().map(|c| (self.target.offset(&c.dist), c.status))
    }

    fn insert(&mut self, id: NodeId, cap: usize) {
        let dist = id.distance_unchecked(&self.target);
        let pos = match self.shortlist.binary_search_by(|c| c.dist.cmp(&dist)) {
            Ok(_) => return,
            Err(pos) => pos,
        };
        if pos >= cap {
            return;
        }
        self.shortlist.insert(pos, Candidate { dist, status: CandidateStatus::Unqueried });
        if self.shortlist.len() > cap {
            // Never evict a pending request's candidate; its reply still needs a slot.
            if let Some(idx) = self.shortlist.iter().rposition(|c| c.status != CandidateStatus::Inflight) {
                self.shortlist.remove(idx);
            }
        }
    }

    fn set_status(&mut self, id: &NodeId, status: CandidateStatus) {
        let dist = id.distance_unchecked(&self.target);
        if let Ok(pos) = self.shortlist.binary_search_by(|c| c.dist.cmp(&dist)) {
            self.shortlist[pos].status = status;
        }
    }

    fn responded(&self, k: usize) -> Vec<NodeId> {
        self.shortlist
            .iter()
            .filter(|c| c.status == CandidateStatus::Responded)
            .take(k)
            .map(|c| self.target.offset(&c.dist))
            .collect()
    }
}

#[derive(Clone, Debug)]
struct StoreOp {
    outstanding: usize,
    acked: usize,
}

#[derive(Clone, Debug)]
enum Pending {
    Lookup(OpId),
    Store(OpId),
    /// Ping of a full bucket's head on behalf of `candidate`.
    Ping { candidate: NodeId },
}

#[derive(Clone, Debug)]
struct Outstanding {
    peer: NodeId,
    kind: Pending,
}

#[derive(Clone, Debug)]
pub struct Node {
    id: NodeId,
    table: RoutingTable,
    store: BTreeMap<NodeId, Vec<u8>>,
    alive: bool,
    params: ProtocolParams,
    next_request: u64,
    next_op: u64,
    pending: BTreeMap<RequestId, Outstanding>,
    lookups: BTreeMap<OpId, LookupState>,
    stores: BTreeMap<OpId, StoreOp>,
    pinging: BTreeSet<NodeId>,
}

impl Node {
    pub fn new(id: NodeId, params: ProtocolParams) -> Node {
        assert!(params.k >= 1 && params.alpha >= 1 && params.staleness >= 1);
        Node {
            id,
            table: RoutingTable::new(id, params.k),
            store: BTreeMap::new(),
            alive: true,
            params,
            next_request: 0,
            next_op: 0,
            pending: BTreeMap::new(),
            lookups: BTreeMap::new(),
            stores: BTreeMap::new(),
            pinging: BTreeSet::new(),
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn table(&self) -> &RoutingTable {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut RoutingTable {
        &mut self.table
    }

    pub fn params(&self) -> ProtocolParams {
        self.params
    }

    pub fn set_staleness(&mut self, limit: u32) {
        assert!(limit >= 1, "staleness limit must be positive");
        self.params.staleness = limit;
    }

    pub fn stored(&self, key: &NodeId) -> Option<&[u8]> {
        self.store.get(key).map(Vec::as_slice)
    }

    pub fn is_alive(&self) -> bool {
        self.alive
    }

    /// Silent departure: the node stops answering and forgets its operations.
    pub fn kill(&mut self) {
        self.alive = false;
        self.pending.clear();
        self.lookups.clear();
        self.stores.clear();
        self.pinging.clear();
    }

    pub fn lookup(&self, op: OpId) -> Option<&LookupState> {
        self.lookups.get(&op)
    }

    pub fn active_lookups(&self) -> usize {
        self.lookups.len()
    }

    pub fn pending_requests(&self) -> usize {
        self.pending.len()
    }

    fn request(&mut self, to: NodeId, body: Body, kind: Pending, out: &mut Vec<Action>) {
        let request_id = RequestId(self.next_request);
        self.next_request += 1;
        self.pending.insert(request_id, Outstanding { peer: to, kind });
        out.push(Action::Send(Message { from: self.id, to, request_id, body }));
    }

    fn reply(&self, to: NodeId, request_id: RequestId, body: Body, out: &mut Vec<Action>) {
        out.push(Action::Send(Message { from: self.id, to, request_id, body }));
    }

    /// Adds `peer` to the table, pinging the bucket head when the bucket is full.
    fn observe(&mut self, peer: NodeId, now: SimTime, out: &mut Vec<Action>) {
        if let InsertOutcome::BucketFull { head } = self.table.observe_contact(peer, now) {
            if self.pinging.insert(head) {
                self.request(head, Body::PingReq, Pending::Ping { candidate: peer }, out);
            }
        }
    }

    /// Records a failed exchange with `peer`, dropping it at the staleness limit.
    pub fn on_message_failure(&mut self, peer: NodeId) -> FailureOutcome {
        self.table.record_failure(&peer, self.params.staleness)
    }

    pub fn handle_message(&mut self, msg: Message, now: SimTime, out: &mut Vec<Action>) {
        if !self.alive || msg.to != self.id || msg.from == self.id {
            return;
        }
        self.observe(msg.from, now, out);
        match msg.body {
            Body::FindNodeReq { target } => {
                let mut contacts = self.table.closest_contacts(&target, self.params.k + 1);
                contacts.retain(|c| *c != msg.from);
                contacts.truncate(self.params.k);
                self.reply(msg.from, msg.request_id, Body::FindNodeResp { contacts }, out);
            }
            Body::StoreReq { key, payload } => {
                self.store.insert(key, payload);
                self.reply(msg.from, msg.request_id, Body::StoreResp, out);
            }
            Body::PingReq => self.reply(msg.from, msg.request_id, Body::PingResp, out),
            Body::FindNodeResp { contacts } => {
                if let Some(Outstanding { kind: Pending::Lookup(op), .. }) =
                    self.take_pending(msg.request_id, &msg.from)
                {
                    self.lookup_response(op, msg.from, &contacts, now, out);
                }
            }
            Body::StoreResp => {
                if let Some(Outstanding { kind: Pending::Store(op), .. }) =
                    self.take_pending(msg.request_id, &msg.from)
                {
                    self.store_resolved(op, true, out);
                }
            }
            Body::PingResp => {
                if let Some(Outstanding { kind: Pending::Ping { .. }, peer }) =
                    self.take_pending(msg.request_id, &msg.from)
                {
                    // The head answered and was refreshed by `observe`; the newcomer is dropped.
                    self.pinging.remove(&peer);
                }
            }
        }
    }

    fn take_pending(&mut self, request: RequestId, from: &NodeId) -> Option<Outstanding> {
        match self.pending.get(&request) {
            Some(o) if o.peer == *from => self.pending.remove(&request),
            _ => None,
        }
    }

    /// The request `request` got no answer in time.
    pub fn on_timeout(&mut self, request: RequestId, now: SimTime, out: &mut Vec<Action>) {
        if !self.alive {
            return;
        }
        let Some(Outstanding { peer, kind }) = self.pending.remove(&request) else {
            return;
        };
        let outcome = self.on_message_failure(peer);
        match kind {
            Pending::Lookup(op) => {
                if let Some(state) = self.lookups.get_mut(&op) {
                    state.inflight -= 1;
                    state.set_status(&peer, CandidateStatus::Failed);
                    self.advance_lookup(op, now, out);
                }
            }
            Pending::Store(op) => self.store_resolved(op, false, out),
            Pending::Ping { candidate } => {
                self.pinging.remove(&peer);
                if outcome == FailureOutcome::Removed {
                    self.table.observe_contact(candidate, now);
                }
            }
        }
    }

    /// Joins through `seed` (if any) by looking up the node's own id.
    pub fn bootstrap(&mut self, seed: Option<NodeId>, now: SimTime, out: &mut Vec<Action>) -> Option<OpId> {
        let seed = seed?;
        self.table.observe_contact(seed, now);
        Some(self.start_lookup(self.id, Purpose::Join, now, out))
    }

    /// One lookup of a random id in every bucket range.
    pub fn bucket_refresh<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        now: SimTime,
        out: &mut Vec<Action>,
    ) -> Vec<OpId> {
        (0..self.id.bits())
            .map(|i| {
                let target = self.id.random_in_bucket(i, rng).expect("bucket index below width");
                self.start_lookup(target, Purpose::Refresh, now, out)
            })
            .collect()
    }

    pub fn start_dissemination(
        &mut self,
        key: NodeId,
        payload: Vec<u8>,
        now: SimTime,
        out: &mut Vec<Action>,
    ) -> OpId {
        self.start_lookup(key, Purpose::Disseminate { payload }, now, out)
    }

    pub fn start_lookup(&mut self, target: NodeId, purpose: Purpose, now: SimTime, out: &mut Vec<Action>) -> OpId {
        let op = OpId(self.next_op);
        self.next_op += 1;
        let k = self.params.k;
        let mut state = LookupState {
            target,
            purpose,
            shortlist: Vec::with_capacity(SHORTLIST_PER_K * k + 1),
            inflight: 0,
            sent: 0,
        };
        for id in self.table.closest_contacts(&target, k) {
            state.insert(id, SHORTLIST_PER_K * k);
        }
        self.lookups.insert(op, state);
        self.advance_lookup(op, now, out);
        op
    }

    fn lookup_response(&mut self, op: OpId, from: NodeId, contacts: &[NodeId], now: SimTime, out: &mut Vec<Action>) {
        let me = self.id;
        let cap = SHORTLIST_PER_K * self.params.k;
        let Some(state) = self.lookups.get_mut(&op) else {
            return;
        };
        state.inflight -= 1;
        state.set_status(&from, CandidateStatus::Responded);
        for c in contacts {
            if *c != me && c.bits() == me.bits() {
                state.insert(*c, cap);
            }
        }
        self.advance_lookup(op, now, out);
    }

    /// Issues queries to the best unqueried candidates among the `k` closest
    /// live ones, or finishes the lookup once those have all responded.
    fn advance_lookup(&mut self, op: OpId, now: SimTime, out: &mut Vec<Action>) {
        let ProtocolParams { k, alpha, .. } = self.params;
        let budget = LOOKUP_BUDGET_PER_K * k;
        let Some(state) = self.lookups.get_mut(&op) else {
            return;
        };
        let target = state.target;
        let mut to_query = Vec::new();
        let mut settled = true;
        for cand in state.shortlist.iter_mut().filter(|c| c.status != CandidateStatus::Failed).take(k) {
            match cand.status {
                CandidateStatus::Responded => {}
                CandidateStatus::Inflight => settled = false,
                CandidateStatus::Unqueried => {
                    settled = false;
                    if state.inflight + to_query.len() < alpha && state.sent + to_query.len() < budget {
                        cand.status = CandidateStatus::Inflight;
                        to_query.push(target.offset(&cand.dist));
                    }
                }
                CandidateStatus::Failed => unreachable!(),
            }
        }
        state.inflight += to_query.len();
        state.sent += to_query.len();
        let exhausted = state.sent >= budget && state.inflight == 0;
        if to_query.is_empty() && (settled || exhausted || state.inflight == 0) {
            let state = self.lookups.remove(&op).expect("lookup present");
            self.finish_lookup(op, state, now, out);
            return;
        }
        for peer in to_query {
            self.request(peer, Body::FindNodeReq { target }, Pending::Lookup(op), out);
        }
    }

    fn finish_lookup(&mut self, op: OpId, state: LookupState, _now: SimTime, out: &mut Vec<Action>) {
        let found = state.responded(self.params.k);
        match state.purpose {
            Purpose::Disseminate { payload } => {
                if found.is_empty() {
                    out.push(Action::Finished { op, result: OpResult::Stored(0) });
                    return;
                }
                self.stores.insert(op, StoreOp { outstanding: found.len(), acked: 0 });
                for peer in found {
                    let body = Body::StoreReq { key: state.target, payload: payload.clone() };
                    self.request(peer, body, Pending::Store(op), out);
                }
            }
            _ => out.push(Action::Finished { op, result: OpResult::Found(found) }),
        }
    }

    fn store_resolved(&mut self, op: OpId, acked: bool, out: &mut Vec<Action>) {
        let Some(s) = self.stores.get_mut(&op) else {
            return;
        };
        s.outstanding -= 1;
        if acked {
            s.acked += 1;
        }
        if s.outstanding == 0 {
            let acked = s.acked;
            self.stores.remove(&op);
            out.push(Action::Finished { op, result: OpResult::Stored(acked) });
        }
    }
}
