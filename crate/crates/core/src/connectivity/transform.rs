use super::flow::{FlowNetwork, FlowWorkspace};
use super::graph::DiGraph;
use crate::error::GraphError;

/// Vertex-split network: vertex `v` becomes an incoming copy `v'` at index
/// `2v` and an outgoing copy `v''` at `2v + 1`, joined by a capacity-1 arc.
/// Edge `(v, w)` becomes `v'' -> w'`. Vertex-disjoint paths in the base graph
/// are exactly unit flows here.
#[derive(Clone, Debug)]
pub struct TransformedGraph {
    base_n: usize,
    base_m: usize,
    net: FlowNetwork,
}

pub fn in_vertex(v: usize) -> usize {
    2 * v
}

pub fn out_vertex(v: usize) -> usize {
    2 * v + 1
}

impl TransformedGraph {
    pub fn new(g: &DiGraph) -> TransformedGraph {
        let n = g.n();
        let internal = (0..n).map(|v| (in_vertex(v) as u32, out_vertex(v) as u32, 1));
        let edges = g.edges().map(|(v, w)| (out_vertex(v) as u32, in_vertex(w) as u32, 1));
        TransformedGraph { base_n: n, base_m: g.m(), net: FlowNetwork::from_arcs(2 * n, internal.chain(edges)) }
    }

    /// Validates the edge list first: self-loops and parallel edges are rejected.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<TransformedGraph, GraphError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        Ok(TransformedGraph::new(&DiGraph::from_edges(n, edges)?))
    }

    pub fn base_vertex_count(&self) -> usize {
        self.base_n
    }

    pub fn base_edge_count(&self) -> usize {
        self.base_m
    }

    pub fn vertex_count(&self) -> usize {
        self.net.vertex_count()
    }

    pub fn edge_count(&self) -> usize {
        self.net.arc_count()
    }

    pub fn network(&self) -> &FlowNetwork {
        &self.net
    }

    pub fn out_degree(&self, x: usize) -> usize {
        self.net.arcs().filter(|&(u, _, _)| u as usize == x).count()
    }

    pub fn in_degree(&self, x: usize) -> usize {
        self.net.arcs().filter(|&(_, v, _)| v as usize == x).count()
    }

    /// Maximum flow from an outgoing copy to an incoming copy.
    pub fn max_flow(&self, source: usize, sink: usize) -> Result<u32, GraphError> {
        let mut ws = FlowWorkspace::new(&self.net);
        self.max_flow_with(&mut ws, source, sink)
    }

    pub fn max_flow_with(&self, ws: &mut FlowWorkspace, source: usize, sink: usize) -> Result<u32, GraphError> {
        let limit = self.vertex_count();
        if source >= limit {
            return Err(GraphError::VertexOutOfRange(source));
        }
        if sink >= limit {
            return Err(GraphError::VertexOutOfRange(sink));
        }
        if source.is_multiple_of(2) || !sink.is_multiple_of(2) {
            return Err(GraphError::WrongSide);
        }
        if source / 2 == sink / 2 {
            return Err(GraphError::SameEndpoints(source / 2));
        }
        self.net.max_flow_with(ws, source, sink)
    }
}
