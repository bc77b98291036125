//! Vertex connectivity of routing-table graphs.
//!
//! A snapshot becomes a [`DiGraph`] with an edge `v -> w` whenever `w` is in
//! `v`'s routing table. Splitting every vertex into an incoming and an
//! outgoing copy turns vertex-disjoint paths into unit flows, so `κ(v, w)` is
//! one maximum-flow computation and `κ(D)` is its minimum over non-adjacent
//! ordered pairs.

pub mod dimacs;
pub mod flow;
pub mod graph;
pub mod kappa;
pub mod oracle;
pub mod transform;

pub use dimacs::DimacsProblem;
pub use flow::{FlowNetwork, FlowWorkspace};
pub use graph::DiGraph;
pub use kappa::{
    kappa_graph, kappa_pair, menger_paths, report_from_summaries, source_count, source_order, source_summaries,
    source_summary, ConnectivityReport, PairKappa, SourceSummary,
};
pub use oracle::{brute_force_kappa_pair, BRUTE_FORCE_LIMIT};
pub use transform::{in_vertex, out_vertex, TransformedGraph};
