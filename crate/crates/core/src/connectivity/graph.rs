use super::flow::FlowNetwork;
use crate::error::{GraphError, ParseError};
use crate::id::NodeId;
use crate::snapshot::Snapshot;

/// Simple directed graph with unit capacities: no self-loops, no parallel edges.
///
/// Vertices are dense indices. Graphs built from snapshots carry the node id
/// of each vertex, in ascending id order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiGraph {
    labels: Vec<NodeId>,
    succ: Vec<Vec<u32>>,
    in_deg: Vec<u32>,
    m: usize,
}

impl DiGraph {
    pub fn from_edges<I>(n: usize, edges: I) -> Result<DiGraph, GraphError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut succ: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (v, w) in edges {
            if v >= n {
                return Err(GraphError::VertexOutOfRange(v));
            }
            if w >= n {
                return Err(GraphError::VertexOutOfRange(w));
            }
            if v == w {
                return Err(GraphError::SelfLoop(v));
            }
            succ[v].push(w as u32);
        }
        let mut in_deg = vec![0u32; n];
        let mut m = 0;
        for (v, list) in succ.iter_mut().enumerate() {
            list.sort_unstable();
            if let Some(pair) = list.windows(2).find(|p| p[0] == p[1]) {
                return Err(GraphError::ParallelEdge(v, pair[0] as usize));
            }
            for &w in list.iter() {
                in_deg[w as usize] += 1;
            }
            m += list.len();
        }
        Ok(DiGraph { labels: Vec::new(), succ, in_deg, m })
    }

    /// One vertex per node in the snapshot, one edge per contact that is itself
    /// a node of the snapshot. Contacts naming departed nodes are dropped.
    pub fn from_snapshot(snap: &Snapshot) -> DiGraph {
        let labels: Vec<NodeId> = snap.entries.keys().copied().collect();
        let index = |id: &NodeId| labels.binary_search(id).ok();
        let mut edges = Vec::with_capacity(snap.contact_count());
        for (v, contacts) in snap.entries.values().enumerate() {
            for c in contacts {
                if let Some(w) = index(c) {
                    if w != v {
                        edges.push((v, w));
                    }
                }
            }
        }
        let mut g = DiGraph::from_edges(labels.len(), edges).expect("snapshot lists are sorted and unique");
        g.labels = labels;
        g
    }

    /// Parses snapshot text and builds its connectivity graph.
    pub fn parse_snapshot(text: &str) -> Result<DiGraph, ParseError> {
        Snapshot::parse(text).map(|s| DiGraph::from_snapshot(&s))
    }

    pub fn n(&self) -> usize {
        self.succ.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn label(&self, v: usize) -> Option<NodeId> {
        self.labels.get(v).copied()
    }

    pub fn labels(&self) -> &[NodeId] {
        &self.labels
    }

    pub fn successors(&self, v: usize) -> &[u32] {
        &self.succ[v]
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.succ[v].len()
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.in_deg[v] as usize
    }

    pub fn has_edge(&self, v: usize, w: usize) -> bool {
        self.succ[v].binary_search(&(w as u32)).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succ.iter().enumerate().flat_map(|(v, list)| list.iter().map(move |&w| (v, w as usize)))
    }

    /// Every ordered pair of distinct vertices is an edge.
    pub fn is_complete(&self) -> bool {
        let n = self.n();
        n >= 1 && self.m == n * (n - 1)
    }

    pub fn with_edge(&self, v: usize, w: usize) -> Result<DiGraph, GraphError> {
        let mut g = DiGraph::from_edges(self.n(), self.edges().chain(std::iter::once((v, w))))?;
        g.labels = self.labels.clone();
        Ok(g)
    }

    /// The graph itself as a flow network, every edge with capacity 1.
    pub fn flow_network(&self) -> FlowNetwork {
        FlowNetwork::from_arcs(self.n(), self.edges().map(|(v, w)| (v as u32, w as u32, 1)))
    }

    /// Fraction of edges whose reverse edge is also present.
    pub fn reciprocity(&self) -> Result<f64, GraphError> {
        if self.m == 0 {
            return Err(GraphError::NoEdges);
        }
        let mutual = self.edges().filter(|&(v, w)| self.has_edge(w, v)).count();
        Ok(mutual as f64 / self.m as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::SimTime;

    fn id(v: u64) -> NodeId {
        NodeId::from_u64(v, 8).unwrap()
    }

    #[test]
    fn two_cycle_from_snapshot() {
        let mut s = Snapshot::new(SimTime::ZERO, 8);
        s.entries.insert(id(1), vec![id(2)]);
        s.entries.insert(id(2), vec![id(1)]);
        let g = DiGraph::from_snapshot(&s);
        assert_eq!((g.n(), g.m()), (2, 2));
        assert_eq!(g.reciprocity().unwrap(), 1.0);
    }

    #[test]
    fn dangling_contacts_are_dropped() {
        let mut s = Snapshot::new(SimTime::ZERO, 8);
        s.entries.insert(id(1), vec![id(2), id(99)]);
        s.entries.insert(id(2), vec![id(1)]);
        let g = DiGraph::from_snapshot(&s);
        assert_eq!((g.n(), g.m()), (2, 2));
    }

    #[test]
    fn rejects_loops_and_parallel_edges() {
        assert_eq!(DiGraph::from_edges(2, [(0, 0)]), Err(GraphError::SelfLoop(0)));
        assert_eq!(DiGraph::from_edges(2, [(0, 1), (0, 1)]), Err(GraphError::ParallelEdge(0, 1)));
        assert_eq!(DiGraph::from_edges(2, [(0, 2)]), Err(GraphError::VertexOutOfRange(2)));
    }

    #[test]
    fn reciprocity_edge_cases() {
        assert_eq!(DiGraph::from_edges(2, [(0, 1)]).unwrap().reciprocity().unwrap(), 0.0);
        assert_eq!(DiGraph::from_edges(2, []).unwrap().reciprocity(), Err(GraphError::NoEdges));
    }

    #[test]
    fn parse_errors_keep_line_numbers() {
        let err = DiGraph::parse_snapshot("SNAPSHOT t=0 b=8 n=2\n01: 02\n02 01\n").unwrap_err();
        assert_eq!(err.line, 3);
    }

    #[test]
    fn counts_match_independent_recount() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let mut s = Snapshot::new(SimTime::ZERO, 16);
            let ids: Vec<NodeId> = (0..30).map(|_| NodeId::random(&mut rng, 16).unwrap()).collect();
            let ghosts: Vec<NodeId> = (0..5).map(|_| NodeId::random(&mut rng, 16).unwrap()).collect();
            for &me in &ids {
                let mut list: Vec<NodeId> = ids
                    .iter()
                    .chain(ghosts.iter())
                    .copied()
                    .filter(|&o| o != me && rng.gen_bool(0.3))
                    .collect();
                list.sort();
                list.dedup();
                s.entries.insert(me, list);
            }
            let text = s.to_text();
            let g = DiGraph::parse_snapshot(&text).unwrap();
            // Second parser: plain string splitting.
            let mut lines = text.lines().skip(1);
            let keys: std::collections::HashSet<&str> =
                text.lines().skip(1).map(|l| l.split(':').next().unwrap()).collect();
            let mut edges = 0;
            for line in lines.by_ref() {
                let rest = line.split(':').nth(1).unwrap().trim();
                edges += rest.split(',').filter(|c| !c.is_empty() && keys.contains(c)).count();
            }
            assert_eq!(g.n(), keys.len());
            assert_eq!(g.m(), edges);
        }
    }
}
