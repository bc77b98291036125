//! Highest-label push-relabel maximum flow on a compact arc array.
//!
//! Only the first phase runs: it yields a maximum preflow whose excess at the
//! sink is the maximum flow value. Gap relabeling and periodic global
//! relabeling (backward BFS from the sink) keep the labels tight.

use crate::error::GraphError;

/// Directed network in compressed adjacency form. Every input arc is paired
/// with a zero-capacity reverse arc.
#[derive(Clone, Debug)]
pub struct FlowNetwork {
    n: usize,
    /// Arcs of vertex `v` occupy `start[v]..start[v + 1]`.
    start: Vec<u32>,
    head: Vec<u32>,
    rev: Vec<u32>,
    cap: Vec<u32>,
    /// Position of each input arc, in input order.
    forward: Vec<u32>,
}

impl FlowNetwork {
    pub fn from_arcs<I>(n: usize, arcs: I) -> FlowNetwork
    where
        I: IntoIterator<Item = (u32, u32, u32)>,
    {
        let arcs: Vec<(u32, u32, u32)> = arcs.into_iter().collect();
        let mut degree = vec![0u32; n + 1];
        for &(u, v, _) in &arcs {
            assert!((u as usize) < n && (v as usize) < n, "arc endpoint out of range");
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut start = vec![0u32; n + 1];
        for v in 0..n {
            start[v + 1] = start[v] + degree[v];
        }
        let total = start[n] as usize;
        let mut fill = start.clone();
        let mut head = vec![0u32; total];
        let mut rev = vec![0u32; total];
        let mut cap = vec![0u32; total];
        let mut forward = Vec::with_capacity(arcs.len());
        for &(u, v, c) in &arcs {
            let a = fill[u as usize];
            fill[u as usize] += 1;
            let b = fill[v as usize];
            fill[v as usize] += 1;
            head[a as usize] = v;
            cap[a as usize] = c;
            rev[a as usize] = b;
            head[b as usize] = u;
            rev[b as usize] = a;
            forward.push(a);
        }
        FlowNetwork { n, start, head, rev, cap, forward }
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    /// Number of input arcs (reverse arcs excluded).
    pub fn arc_count(&self) -> usize {
        self.forward.len()
    }

    /// Input arcs as `(from, to, capacity)`, in input order.
    pub fn arcs(&self) -> impl Iterator<Item = (u32, u32, u32)> + '_ {
        self.forward.iter().map(|&a| {
            let a = a as usize;
            (self.head[self.rev[a] as usize], self.head[a], self.cap[a])
        })
    }

    pub fn max_flow(&self, s: usize, t: usize) -> Result<u32, GraphError> {
        let mut ws = FlowWorkspace::new(self);
        self.max_flow_with(&mut ws, s, t)
    }

    /// Like [`FlowNetwork::max_flow`] but reuses the buffers in `ws`. After the
    /// call, `ws` holds the preflow, readable with [`FlowWorkspace::flow_on`].
    pub fn max_flow_with(&self, ws: &mut FlowWorkspace, s: usize, t: usize) -> Result<u32, GraphError> {
        if s >= self.n {
            return Err(GraphError::VertexOutOfRange(s));
        }
        if t >= self.n {
            return Err(GraphError::VertexOutOfRange(t));
        }
        if s == t {
            return Err(GraphError::SameEndpoints(s));
        }
        ws.resize(self);
        Ok(Solver { net: self, ws, s: s as u32, t: t as u32 }.run())
    }
}

/// Per-call scratch state. Reusing one across calls avoids reallocation.
#[derive(Clone, Debug, Default)]
pub struct FlowWorkspace {
    residual: Vec<u32>,
    excess: Vec<u64>,
    height: Vec<u32>,
    current: Vec<u32>,
    /// Active vertices bucketed by height.
    active: Vec<Vec<u32>>,
    /// Vertices per height below `n`, for gap detection.
    count: Vec<u32>,
    queue: Vec<u32>,
}

impl FlowWorkspace {
    pub fn new(net: &FlowNetwork) -> FlowWorkspace {
        let mut ws = FlowWorkspace::default();
        ws.resize(net);
        ws
    }

    fn resize(&mut self, net: &FlowNetwork) {
        let n = net.n;
        self.residual.clear();
        self.residual.extend_from_slice(&net.cap);
        self.excess.clear();
        self.excess.resize(n, 0);
        self.height.clear();
        self.height.resize(n, 0);
        self.current.clear();
        self.current.extend_from_slice(&net.start[..n]);
        self.active.resize_with(n + 1, Vec::new);
        self.active.iter_mut().for_each(Vec::clear);
        self.count.clear();
        self.count.resize(n + 1, 0);
    }

    /// Flow the last run put on input arc `i` (input order).
    pub fn flow_on(&self, net: &FlowNetwork, i: usize) -> u32 {
        let a = net.forward[i] as usize;
        net.cap[a] - self.residual[a].min(net.cap[a])
    }
}

struct Solver<'a> {
    net: &'a FlowNetwork,
    ws: &'a mut FlowWorkspace,
    s: u32,
    t: u32,
}

impl Solver<'_> {
    fn run(mut self) -> u32 {
        let n = self.net.n as u32;
        let s = self.s as usize;
        for a in self.net.start[s]..self.net.start[s + 1] {
            let a = a as usize;
            let c = self.ws.residual[a];
            if c > 0 {
                let v = self.net.head[a] as usize;
                self.ws.residual[a] = 0;
                self.ws.residual[self.net.rev[a] as usize] += c;
                self.ws.excess[v] += c as u64;
            }
        }
        self.global_relabel();
        let mut highest = self.rebuild_active();
        let mut relabels = 0u32;
        loop {
            let Some(u) = self.ws.active[highest as usize].pop() else {
                if highest == 0 {
                    break;
                }
                highest -= 1;
                continue;
            };
            let u = u as usize;
            if self.ws.height[u] != highest || self.ws.excess[u] == 0 {
                continue;
            }
            relabels += self.discharge(u, &mut highest);
            if relabels >= n {
                relabels = 0;
                self.global_relabel();
                highest = self.rebuild_active();
            }
        }
        self.ws.excess[self.t as usize] as u32
    }

    /// Exact distance-to-sink labels over the residual graph. Vertices that
    /// cannot reach the sink, and the source, get label `n` and stay inactive.
    fn global_relabel(&mut self) {
        let n = self.net.n;
        let ws = &mut *self.ws;
        ws.height.iter_mut().for_each(|h| *h = n as u32);
        ws.count.iter_mut().for_each(|c| *c = 0);
        ws.queue.clear();
        let t = self.t as usize;
        ws.height[t] = 0;
        ws.count[0] = 1;
        ws.queue.push(t as u32);
        let mut i = 0;
        while i < ws.queue.len() {
            let v = ws.queue[i] as usize;
            i += 1;
            let next = ws.height[v] + 1;
            for a in self.net.start[v]..self.net.start[v + 1] {
                let a = a as usize;
                let u = self.net.head[a] as usize;
                if ws.height[u] == n as u32 && u != self.s as usize && ws.residual[self.net.rev[a] as usize] > 0 {
                    ws.height[u] = next;
                    ws.count[next as usize] += 1;
                    ws.queue.push(u as u32);
                }
            }
        }
        ws.current.copy_from_slice(&self.net.start[..n]);
    }

    fn rebuild_active(&mut self) -> u32 {
        let n = self.net.n as u32;
        let ws = &mut *self.ws;
        ws.active.iter_mut().for_each(Vec::clear);
        let mut highest = 0;
        for v in 0..self.net.n {
            let h = ws.height[v];
            if ws.excess[v] > 0 && h < n && v as u32 != self.t {
                ws.active[h as usize].push(v as u32);
                highest = highest.max(h);
            }
        }
        highest
    }

    /// Pushes `u`'s excess downhill, relabeling as needed. Returns relabel count.
    fn discharge(&mut self, u: usize, highest: &mut u32) -> u32 {
        let n = self.net.n as u32;
        let end = self.net.start[u + 1];
        let mut relabels = 0;
        while self.ws.excess[u] > 0 {
            let a = self.ws.current[u];
            if a == end {
                relabels += 1;
                if !self.relabel(u) {
                    break;
                }
                continue;
            }
            let ai = a as usize;
            let v = self.net.head[ai] as usize;
            let r = self.ws.residual[ai];
            if r > 0 && self.ws.height[u] == self.ws.height[v] + 1 {
                let delta = (r as u64).min(self.ws.excess[u]) as u32;
                self.ws.residual[ai] -= delta;
                self.ws.residual[self.net.rev[ai] as usize] += delta;
                self.ws.excess[u] -= delta as u64;
                let was_idle = self.ws.excess[v] == 0;
                self.ws.excess[v] += delta as u64;
                if was_idle && v as u32 != self.t && v as u32 != self.s && self.ws.height[v] < n {
                    let h = self.ws.height[v];
                    self.ws.active[h as usize].push(v as u32);
                    *highest = (*highest).max(h);
                }
                if self.ws.excess[u] > 0 {
                    self.ws.current[u] += 1;
                }
            } else {
                self.ws.current[u] += 1;
            }
        }
        relabels
    }

    /// Lifts `u` just above its lowest residual neighbour. Returns false once
    /// `u` is cut off from the sink.
    fn relabel(&mut self, u: usize) -> bool {
        let n = self.net.n as u32;
        let old = self.ws.height[u];
        let mut lowest = n;
        for a in self.net.start[u]..self.net.start[u + 1] {
            let a = a as usize;
            if self.ws.residual[a] > 0 {
                lowest = lowest.min(self.ws.height[self.net.head[a] as usize] + 1);
            }
        }
        self.ws.count[old as usize] -= 1;
        if self.ws.count[old as usize] == 0 {
            // Nothing left at `old`: everything above it is cut off too.
            for h in self.ws.height.iter_mut() {
                if *h > old && *h < n {
                    self.ws.count[*h as usize] -= 1;
                    *h = n;
                }
            }
            self.ws.height[u] = n;
            return false;
        }
        let new = lowest.min(n);
        self.ws.height[u] = new;
        if new >= n {
            return false;
        }
        self.ws.count[new as usize] += 1;
        self.ws.current[u] = self.net.start[u];
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Edmonds-Karp with a dense capacity matrix.
    fn oracle(n: usize, arcs: &[(u32, u32, u32)], s: usize, t: usize) -> u32 {
        let mut cap = vec![vec![0i64; n]; n];
        for &(u, v, c) in arcs {
            cap[u as usize][v as usize] += c as i64;
        }
        let mut total = 0;
        loop {
            let mut prev = vec![usize::MAX; n];
            prev[s] = s;
            let mut queue = std::collections::VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for v in 0..n {
                    if prev[v] == usize::MAX && cap[u][v] > 0 {
                        prev[v] = u;
                        queue.push_back(v);
                    }
                }
            }
            if prev[t] == usize::MAX {
                return total;
            }
            let mut bottleneck = i64::MAX;
            let mut v = t;
            while v != s {
                bottleneck = bottleneck.min(cap[prev[v]][v]);
                v = prev[v];
            }
            let mut v = t;
            while v != s {
                cap[prev[v]][v] -= bottleneck;
                cap[v][prev[v]] += bottleneck;
                v = prev[v];
            }
            total += bottleneck as u32;
        }
    }

    #[test]
    fn classic_textbook_network() {
        let arcs = [(0, 1, 16), (0, 2, 13), (1, 2, 10), (2, 1, 4), (1, 3, 12), (3, 2, 9), (2, 4, 14), (4, 3, 7), (3, 5, 20), (4, 5, 4)];
        let net = FlowNetwork::from_arcs(6, arcs);
        assert_eq!(net.max_flow(0, 5).unwrap(), 23);
    }

    #[test]
    fn unreachable_sink_gives_zero() {
        let net = FlowNetwork::from_arcs(3, [(0, 1, 5)]);
        assert_eq!(net.max_flow(0, 2).unwrap(), 0);
        assert_eq!(net.max_flow(1, 0).unwrap(), 0);
    }

    #[test]
    fn bad_endpoints_are_rejected() {
        let net = FlowNetwork::from_arcs(2, [(0, 1, 1)]);
        assert_eq!(net.max_flow(0, 0), Err(GraphError::SameEndpoints(0)));
        assert_eq!(net.max_flow(0, 2), Err(GraphError::VertexOutOfRange(2)));
    }

    #[test]
    fn arcs_round_trip_in_input_order() {
        let arcs = vec![(2, 0, 3), (0, 1, 1), (1, 2, 7)];
        let net = FlowNetwork::from_arcs(3, arcs.clone());
        assert_eq!(net.arcs().collect::<Vec<_>>(), arcs);
        assert_eq!((net.vertex_count(), net.arc_count()), (3, 3));
    }

    fn network() -> impl Strategy<Value = (usize, Vec<(u32, u32, u32)>)> {
        (2usize..12).prop_flat_map(|n| {
            let arc = (0..n as u32, 0..n as u32, 0u32..6).prop_filter("no loops", |(u, v, _)| u != v);
            (Just(n), proptest::collection::vec(arc, 0..50))
        })
    }

    proptest! {
        #[test]
        fn agrees_with_augmenting_paths((n, arcs) in network(), s in 0usize..12, t in 0usize..12) {
            let (s, t) = (s % n, t % n);
            prop_assume!(s != t);
            let net = FlowNetwork::from_arcs(n, arcs.clone());
            prop_assert_eq!(net.max_flow(s, t).unwrap(), oracle(n, &arcs, s, t));
        }

        #[test]
        fn workspace_reuse_matches_fresh_runs((n, arcs) in network()) {
            let net = FlowNetwork::from_arcs(n, arcs);
            let mut ws = FlowWorkspace::new(&net);
            for s in 0..n {
                for t in 0..n {
                    if s != t {
                        prop_assert_eq!(net.max_flow_with(&mut ws, s, t).unwrap(), net.max_flow(s, t).unwrap());
                    }
                }
            }
        }

        #[test]
        fn preflow_respects_capacities((n, arcs) in network(), s in 0usize..12, t in 0usize..12) {
            let (s, t) = (s % n, t % n);
            prop_assume!(s != t);
            let net = FlowNetwork::from_arcs(n, arcs.clone());
            let mut ws = FlowWorkspace::new(&net);
            let value = net.max_flow_with(&mut ws, s, t).unwrap();
            let mut balance = vec![0i64; n];
            for (i, &(u, v, c)) in arcs.iter().enumerate() {
                let f = ws.flow_on(&net, i);
                prop_assert!(f <= c);
                balance[u as usize] -= f as i64;
                balance[v as usize] += f as i64;
            }
            prop_assert_eq!(balance[t], value as i64);
            for (v, b) in balance.iter().enumerate() {
                if v != s {
                    prop_assert!(*b >= 0, "vertex {} has negative excess", v);
                }
            }
        }
    }
}
