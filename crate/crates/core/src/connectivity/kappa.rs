use rayon::prelude::*;

use super::flow::FlowWorkspace;
use super::graph::DiGraph;
use super::transform::{in_vertex, out_vertex, TransformedGraph};
use crate::error::GraphError;
use crate::time::SimTime;

/// Outcome of one ordered pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairKappa {
    Value(u32),
    /// `(v, w)` is an edge, so no vertex set separates the pair.
    Adjacent,
}

/// Number of vertex-disjoint `v -> w` paths, or `Adjacent` when `v -> w` is an edge.
pub fn kappa_pair(g: &DiGraph, t: &TransformedGraph, v: usize, w: usize) -> Result<PairKappa, GraphError> {
    let mut ws = FlowWorkspace::new(t.network());
    kappa_pair_with(g, t, &mut ws, v, w)
}

fn kappa_pair_with(
    g: &DiGraph,
    t: &TransformedGraph,
    ws: &mut FlowWorkspace,
    v: usize,
    w: usize,
) -> Result<PairKappa, GraphError> {
    check_pair(g, v, w)?;
    if g.has_edge(v, w) {
        return Ok(PairKappa::Adjacent);
    }
    if g.out_degree(v) == 0 || g.in_degree(w) == 0 {
        return Ok(PairKappa::Value(0));
    }
    t.max_flow_with(ws, out_vertex(v), in_vertex(w)).map(PairKappa::Value)
}

fn check_pair(g: &DiGraph, v: usize, w: usize) -> Result<(), GraphError> {
    for x in [v, w] {
        if x >= g.n() {
            return Err(GraphError::VertexOutOfRange(x));
        }
    }
    if v == w {
        return Err(GraphError::SameEndpoints(v));
    }
    Ok(())
}

/// `κ(v, w)` vertex-disjoint `v -> w` paths, each listed from `v` to `w`,
/// read off the flow that proves the value.
pub fn menger_paths(g: &DiGraph, t: &TransformedGraph, v: usize, w: usize) -> Result<Vec<Vec<usize>>, GraphError> {
    check_pair(g, v, w)?;
    if g.has_edge(v, w) {
        return Err(GraphError::Adjacent(v, w));
    }
    let net = t.network();
    let mut ws = FlowWorkspace::new(net);
    let (s, sink) = (out_vertex(v), in_vertex(w));
    let value = t.max_flow_with(&mut ws, s, sink)?;
    // Remaining flow on arcs entering each transformed vertex.
    let mut incoming: Vec<Vec<(usize, u32)>> = vec![Vec::new(); net.vertex_count()];
    for (i, (from, to, _)) in net.arcs().enumerate() {
        let f = ws.flow_on(net, i);
        if f > 0 {
            incoming[to as usize].push((from as usize, f));
        }
    }
    let mut on_path = vec![usize::MAX; net.vertex_count()];
    let mut paths = Vec::with_capacity(value as usize);
    for _ in 0..value {
        let mut path = vec![sink];
        on_path[sink] = 0;
        let mut x = sink;
        while x != s {
            let slot = incoming[x]
                .iter_mut()
                .find(|(_, f)| *f > 0)
                .expect("a preflow keeps inflow at least outflow");
            slot.1 -= 1;
            let u = slot.0;
            if on_path[u] != usize::MAX {
                // Closed a cycle: its arcs are spent, resume from `u`.
                for y in path.drain(on_path[u] + 1..) {
                    on_path[y] = usize::MAX;
                }
            } else {
                on_path[u] = path.len();
                path.push(u);
            }
            x = u;
        }
        for &y in &path {
            on_path[y] = usize::MAX;
        }
        let mut base: Vec<usize> = path.iter().rev().map(|&y| y / 2).collect();
        base.dedup();
        paths.push(base);
    }
    Ok(paths)
}

/// Per-snapshot connectivity summary.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectivityReport {
    pub at: Option<SimTime>,
    pub n: usize,
    pub m: usize,
    pub kappa_min: u32,
    /// Mean over the computed non-adjacent pairs.
    pub kappa_avg: f64,
    pub kappa_sum: u64,
    /// `kappa_min - 1`.
    pub resilience: i64,
    pub c_used: f64,
    pub sources: usize,
    pub pairs_computed: usize,
    pub complete_graph: bool,
    /// A computed pair attaining `kappa_min`.
    pub witness: Option<(usize, usize)>,
}

/// Results for all sinks of one source vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceSummary {
    pub source: usize,
    pub min: Option<(u32, usize)>,
    pub sum: u64,
    pub pairs: usize,
}

/// Vertices sorted by ascending out-degree, ties by ascending index.
pub fn source_order(g: &DiGraph) -> Vec<usize> {
    let mut order: Vec<usize> = (0..g.n()).collect();
    order.sort_by_key(|&v| (g.out_degree(v), v));
    order
}

/// Number of sources a fraction `c` selects.
pub fn source_count(n: usize, c: f64) -> Result<usize, GraphError> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(GraphError::BadFraction(c));
    }
    Ok(((c * n as f64).ceil() as usize).clamp(1, n.max(1)))
}

/// `κ(source, w)` for every non-adjacent `w`, fanned out over sinks.
pub fn source_summary(g: &DiGraph, t: &TransformedGraph, source: usize) -> SourceSummary {
    let values: Vec<Option<u32>> = (0..g.n())
        .into_par_iter()
        .map_init(
            || FlowWorkspace::new(t.network()),
            |ws, w| match w == source {
                true => None,
                false => match kappa_pair_with(g, t, ws, source, w).expect("indices in range") {
                    PairKappa::Value(k) => Some(k),
                    PairKappa::Adjacent => None,
                },
            },
        )
        .collect();
    let mut summary = SourceSummary { source, min: None, sum: 0, pairs: 0 };
    for (w, k) in values.into_iter().enumerate() {
        if let Some(k) = k {
            summary.sum += k as u64;
            summary.pairs += 1;
            if summary.min.is_none_or(|(best, _)| k < best) {
                summary.min = Some((k, w));
            }
        }
    }
    summary
}

/// Summaries for the first `count` sources of [`source_order`].
pub fn source_summaries(g: &DiGraph, t: &TransformedGraph, count: usize) -> Vec<SourceSummary> {
    source_order(g).into_iter().take(count).map(|v| source_summary(g, t, v)).collect()
}

/// Graph connectivity from the `max(1, ceil(c n))` sources of least out-degree.
/// `c = 1` gives the exact value.
pub fn kappa_graph(g: &DiGraph, c: f64) -> Result<ConnectivityReport, GraphError> {
    let count = check_graph(g, c)?;
    if g.is_complete() {
        return Ok(report_from_summaries(g, c, &[]));
    }
    let t = TransformedGraph::new(g);
    Ok(report_from_summaries(g, c, &source_summaries(g, &t, count)))
}

fn check_graph(g: &DiGraph, c: f64) -> Result<usize, GraphError> {
    let count = source_count(g.n(), c)?;
    if g.n() < 2 {
        return Err(GraphError::TooSmall { needed: 2, actual: g.n() });
    }
    Ok(count)
}

/// Builds the report for fraction `c` from summaries in [`source_order`]; only
/// the prefix that `c` selects is used, so one full run serves every `c`.
pub fn report_from_summaries(g: &DiGraph, c: f64, summaries: &[SourceSummary]) -> ConnectivityReport {
    let n = g.n();
    let mut report = ConnectivityReport {
        at: None,
        n,
        m: g.m(),
        kappa_min: 0,
        kappa_avg: 0.0,
        kappa_sum: 0,
        resilience: -1,
        c_used: c,
        sources: 0,
        pairs_computed: 0,
        complete_graph: false,
        witness: None,
    };
    if g.is_complete() {
        report.complete_graph = true;
        report.kappa_min = (n - 1) as u32;
        report.kappa_avg = (n - 1) as f64;
        report.resilience = n as i64 - 2;
        return report;
    }
    let count = source_count(n, c).expect("fraction validated by caller");
    assert!(summaries.len() >= count, "need {count} source summaries, got {}", summaries.len());
    let mut best: Option<(u32, usize, usize)> = None;
    for s in &summaries[..count] {
        report.kappa_sum += s.sum;
        report.pairs_computed += s.pairs;
        if let Some((k, w)) = s.min {
            if best.is_none_or(|(b, _, _)| k < b) {
                best = Some((k, s.source, w));
            }
        }
    }
    report.sources = count;
    // A non-complete graph's first source always has a non-adjacent sink.
    let (k, v, w) = best.expect("some source has a non-adjacent sink");
    report.kappa_min = k;
    report.witness = Some((v, w));
    report.resilience = k as i64 - 1;
    report.kappa_avg = report.kappa_sum as f64 / report.pairs_computed as f64;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectivity::oracle::brute_force_kappa_pair;
    use proptest::prelude::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> DiGraph {
        DiGraph::from_edges(n, edges.iter().copied()).unwrap()
    }

    fn complete(n: usize) -> DiGraph {
        DiGraph::from_edges(n, (0..n).flat_map(|v| (0..n).filter(move |&w| w != v).map(move |w| (v, w)))).unwrap()
    }

    #[test]
    fn complete_graph_on_three_is_all_adjacent() {
        let g = complete(3);
        let t = TransformedGraph::new(&g);
        for v in 0..3 {
            for w in 0..3 {
                if v != w {
                    assert_eq!(kappa_pair(&g, &t, v, w).unwrap(), PairKappa::Adjacent);
                }
            }
        }
    }

    #[test]
    fn complete_k4_is_three() {
        let r = kappa_graph(&complete(4), 1.0).unwrap();
        assert_eq!((r.kappa_min, r.resilience, r.pairs_computed), (3, 2, 0));
        assert!(r.complete_graph);
        assert_eq!(r.kappa_avg, 3.0);
    }

    #[test]
    fn two_disjoint_two_cycles_are_disconnected() {
        let r = kappa_graph(&graph(4, &[(0, 1), (1, 0), (2, 3), (3, 2)]), 1.0).unwrap();
        assert_eq!(r.kappa_min, 0);
        assert_eq!(r.resilience, -1);
        assert_eq!(r.pairs_computed, 8);
    }

    #[test]
    fn pair_errors() {
        let g = graph(2, &[(0, 1)]);
        let t = TransformedGraph::new(&g);
        assert_eq!(kappa_pair(&g, &t, 1, 1), Err(GraphError::SameEndpoints(1)));
        assert_eq!(kappa_pair(&g, &t, 0, 5), Err(GraphError::VertexOutOfRange(5)));
        assert_eq!(kappa_pair(&g, &t, 1, 0).unwrap(), PairKappa::Value(0));
    }

    #[test]
    fn graph_errors() {
        assert_eq!(kappa_graph(&graph(1, &[]), 1.0), Err(GraphError::TooSmall { needed: 2, actual: 1 }));
        assert_eq!(kappa_graph(&graph(3, &[]), 0.0), Err(GraphError::BadFraction(0.0)));
        assert_eq!(kappa_graph(&graph(3, &[]), 1.5), Err(GraphError::BadFraction(1.5)));
    }

    #[test]
    fn source_selection_rounds_up_and_breaks_ties_by_index() {
        assert_eq!(source_count(250, 0.02).unwrap(), 5);
        assert_eq!(source_count(10, 0.01).unwrap(), 1);
        assert_eq!(source_count(7, 1.0).unwrap(), 7);
        let g = graph(4, &[(0, 1), (0, 2), (1, 2), (3, 0)]);
        assert_eq!(source_order(&g), vec![2, 1, 3, 0]);
    }

    #[test]
    fn reduced_value_never_undercuts_exact() {
        let g = graph(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2), (2, 4)]);
        let exact = kappa_graph(&g, 1.0).unwrap();
        let reduced = kappa_graph(&g, 0.2).unwrap();
        assert!(reduced.kappa_min >= exact.kappa_min);
        assert_eq!(reduced.sources, 1);
    }

    fn digraph(max_n: usize, p: f64) -> impl Strategy<Value = DiGraph> {
        (2usize..=max_n).prop_flat_map(move |n| {
            proptest::collection::vec(proptest::bool::weighted(p), n * n).prop_map(move |mask| {
                let edges = (0..n * n).filter(|&i| mask[i] && i / n != i % n).map(|i| (i / n, i % n));
                DiGraph::from_edges(n, edges).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn pairs_match_brute_force(g in digraph(8, 0.4)) {
            let t = TransformedGraph::new(&g);
            for v in 0..g.n() {
                for w in 0..g.n() {
                    if v == w { continue; }
                    match kappa_pair(&g, &t, v, w).unwrap() {
                        PairKappa::Adjacent => prop_assert!(g.has_edge(v, w)),
                        PairKappa::Value(k) => prop_assert_eq!(k, brute_force_kappa_pair(&g, v, w).unwrap()),
                    }
                }
            }
        }

        #[test]
        fn flow_decomposes_into_disjoint_paths(g in digraph(9, 0.35)) {
            let t = TransformedGraph::new(&g);
            for v in 0..g.n() {
                for w in 0..g.n() {
                    if v == w || g.has_edge(v, w) { continue; }
                    let PairKappa::Value(k) = kappa_pair(&g, &t, v, w).unwrap() else { unreachable!() };
                    let paths = menger_paths(&g, &t, v, w).unwrap();
                    prop_assert_eq!(paths.len(), k as usize);
                    let mut used = std::collections::HashSet::new();
                    for p in &paths {
                        prop_assert_eq!(p.first(), Some(&v));
                        prop_assert_eq!(p.last(), Some(&w));
                        for pair in p.windows(2) {
                            prop_assert!(g.has_edge(pair[0], pair[1]));
                        }
                        for &x in &p[1..p.len() - 1] {
                            prop_assert!(used.insert(x), "vertex {} shared", x);
                        }
                    }
                }
            }
        }

        #[test]
        fn adding_an_edge_never_lowers_connectivity(g in digraph(8, 0.4), a in 0usize..8, b in 0usize..8) {
            let (a, b) = (a % g.n(), b % g.n());
            prop_assume!(a != b && !g.has_edge(a, b));
            let before = kappa_graph(&g, 1.0).unwrap().kappa_min;
            let after = kappa_graph(&g.with_edge(a, b).unwrap(), 1.0).unwrap().kappa_min;
            prop_assert!(after >= before);
        }

        #[test]
        fn reduction_only_overestimates(g in digraph(10, 0.5), c in 0.01f64..1.0) {
            let exact = kappa_graph(&g, 1.0).unwrap();
            let reduced = kappa_graph(&g, c).unwrap();
            prop_assert!(reduced.kappa_min >= exact.kappa_min);
            prop_assert!(reduced.pairs_computed <= exact.pairs_computed);
        }

        #[test]
        fn exact_value_is_minimum_over_all_pairs(g in digraph(7, 0.5)) {
            let r = kappa_graph(&g, 1.0).unwrap();
            let mut values = Vec::new();
            for v in 0..g.n() {
                for w in 0..g.n() {
                    if v != w && !g.has_edge(v, w) {
                        values.push(brute_force_kappa_pair(&g, v, w).unwrap());
                    }
                }
            }
            if values.is_empty() {
                prop_assert!(r.complete_graph);
                prop_assert_eq!(r.kappa_min as usize, g.n() - 1);
            } else {
                prop_assert_eq!(r.kappa_min, *values.iter().min().unwrap());
                prop_assert_eq!(r.pairs_computed, values.len());
                prop_assert_eq!(r.kappa_sum, values.iter().map(|&k| k as u64).sum::<u64>());
                let (v, w) = r.witness.unwrap();
                prop_assert_eq!(brute_force_kappa_pair(&g, v, w).unwrap(), r.kappa_min);
            }
        }
    }
}
