//! C interface to kadconn.
//!
//! Objects cross the boundary as opaque pointers created by a `*_new` or
//! `*_from_*` function and released by the matching `*_free`. Every fallible
//! call returns a [`KcStatus`]; on failure [`kc_last_error_message`] describes
//! the problem. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use kadconn::config::parse_scenarios;
use kadconn::connectivity::{kappa_graph, kappa_pair, DiGraph, DimacsProblem, PairKappa, TransformedGraph};
use kadconn::sim::Simulation;
use kadconn::time::SimTime;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Graph = 4,
    Panic = 5,
}

/// A directed connectivity graph.
pub struct KcGraph {
    graph: DiGraph,
    transformed: TransformedGraph,
}

/// A running simulation.
pub struct KcSimulation {
    sim: Simulation,
}

/// Result of [`kc_graph_connectivity`].
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KcReport {
    pub n: usize,
    pub m: usize,
    pub kappa_min: u32,
    pub kappa_avg: f64,
    /// `kappa_min - 1`.
    pub resilience: i64,
    pub sources: usize,
    pub pairs_computed: usize,
    pub complete_graph: bool,
    pub has_witness: bool,
    /// Vertex indices of a pair achieving `kappa_min`, valid if `has_witness`.
    pub witness_source: usize,
    pub witness_sink: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(KcStatus, String);

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> KcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            KcStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            KcStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(KcStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(KcStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn graph_err(e: kadconn::error::GraphError) -> Failure {
    Failure(KcStatus::Graph, e.to_string())
}

fn boxed_graph(graph: DiGraph) -> *mut KcGraph {
    let transformed = TransformedGraph::new(&graph);
    Box::into_raw(Box::new(KcGraph { graph, transformed }))
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn kc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Parses snapshot text into a graph.
///
/// # Safety
/// `snapshot` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kc_graph_from_snapshot_text(snapshot: *const c_char, out_graph: *mut *mut KcGraph) -> KcStatus {
    guard(|| {
        let slot = out(out_graph, "out_graph")?;
        let graph = DiGraph::parse_snapshot(text(snapshot, "snapshot")?)
            .map_err(|e| Failure(KcStatus::Parse, e.to_string()))?;
        *slot = boxed_graph(graph);
        Ok(())
    })
}

/// Builds a graph on `n` vertices from `edge_count` pairs stored as
/// `edges[2i] -> edges[2i + 1]`.
///
/// # Safety
/// `edges` must point to `2 * edge_count` integers (it may be NULL when
/// `edge_count` is 0) and `out_graph` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kc_graph_from_edges(
    n: usize,
    edges: *const u32,
    edge_count: usize,
    out_graph: *mut *mut KcGraph,
) -> KcStatus {
    guard(|| {
        let slot = out(out_graph, "out_graph")?;
        let flat: &[u32] = match edge_count {
            0 => &[],
            _ if edges.is_null() => return Err(null("edges")),
            _ => std::slice::from_raw_parts(edges, 2 * edge_count),
        };
        let graph = DiGraph::from_edges(n, flat.chunks_exact(2).map(|p| (p[0] as usize, p[1] as usize)))
            .map_err(graph_err)?;
        *slot = boxed_graph(graph);
        Ok(())
    })
}

/// # Safety
/// `graph` must come from this library and not be freed twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn kc_graph_free(graph: *mut KcGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Vertex count, or 0 for NULL.
///
/// # Safety
/// `graph` must be NULL or a live graph.
#[no_mangle]
pub unsafe extern "C" fn kc_graph_vertex_count(graph: *const KcGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.graph.n())
}

/// Edge count, or 0 for NULL.
///
/// # Safety
/// `graph` must be NULL or a live graph.
#[no_mangle]
pub unsafe extern "C" fn kc_graph_edge_count(graph: *const KcGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.graph.m())
}

/// Vertex connectivity from `v` to `w`. When the edge `v -> w` exists no
/// vertex set separates them: `*out_adjacent` is set and `*out_kappa` is 0.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn kc_graph_kappa_pair(
    graph: *const KcGraph,
    v: usize,
    w: usize,
    out_kappa: *mut u32,
    out_adjacent: *mut bool,
) -> KcStatus {
    guard(|| {
        let g = handle(graph, "graph")?;
        let kappa = out(out_kappa, "out_kappa")?;
        let adjacent = out(out_adjacent, "out_adjacent")?;
        match kappa_pair(&g.graph, &g.transformed, v, w).map_err(graph_err)? {
            PairKappa::Value(k) => (*kappa, *adjacent) = (k, false),
            PairKappa::Adjacent => (*kappa, *adjacent) = (0, true),
        }
        Ok(())
    })
}

/// Graph connectivity using a fraction `c` in (0, 1] of the vertices as sources.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn kc_graph_connectivity(graph: *const KcGraph, c: f64, out_report: *mut KcReport) -> KcStatus {
    guard(|| {
        let g = handle(graph, "graph")?;
        let slot = out(out_report, "out_report")?;
        let r = kappa_graph(&g.graph, c).map_err(graph_err)?;
        let (witness_source, witness_sink) = r.witness.unwrap_or((0, 0));
        *slot = KcReport {
            n: r.n,
            m: r.m,
            kappa_min: r.kappa_min,
            kappa_avg: r.kappa_avg,
            resilience: r.resilience,
            sources: r.sources,
            pairs_computed: r.pairs_computed,
            complete_graph: r.complete_graph,
            has_witness: r.witness.is_some(),
            witness_source,
            witness_sink,
        };
        Ok(())
    })
}

/// Solves a DIMACS max-flow problem given as text.
///
/// # Safety
/// `dimacs` must be a NUL-terminated string and `out_flow` valid.
#[no_mangle]
pub unsafe extern "C" fn kc_dimacs_max_flow(dimacs: *const c_char, out_flow: *mut u32) -> KcStatus {
    guard(|| {
        let slot = out(out_flow, "out_flow")?;
        let problem =
            DimacsProblem::parse(text(dimacs, "dimacs")?).map_err(|e| Failure(KcStatus::Parse, e.to_string()))?;
        *slot = problem.max_flow().map_err(graph_err)?;
        Ok(())
    })
}

/// Creates scenario number `index` of a key=value config text, ready to run.
///
/// # Safety
/// `config` must be a NUL-terminated string and `out_sim` valid.
#[no_mangle]
pub unsafe extern "C" fn kc_sim_new(config: *const c_char, index: usize, out_sim: *mut *mut KcSimulation) -> KcStatus {
    guard(|| {
        let slot = out(out_sim, "out_sim")?;
        let scenarios =
            parse_scenarios(text(config, "config")?).map_err(|e| Failure(KcStatus::Parse, e.to_string()))?;
        let cfg = scenarios.into_iter().nth(index).ok_or_else(|| {
            Failure(KcStatus::InvalidArgument, format!("config has no scenario with index {index}"))
        })?;
        let sim = Simulation::new(cfg).map_err(|e| Failure(KcStatus::InvalidArgument, e.to_string()))?;
        *slot = Box::into_raw(Box::new(KcSimulation { sim }));
        Ok(())
    })
}

/// # Safety
/// `sim` must come from this library and not be freed twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn kc_sim_free(sim: *mut KcSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances the simulation to `minutes`. Scheduled snapshots taken on the way
/// are counted in `*out_snapshots` (may be NULL) and discarded.
///
/// # Safety
/// `sim` must be a live simulation.
#[no_mangle]
pub unsafe extern "C" fn kc_sim_run_until(sim: *mut KcSimulation, minutes: f64, out_snapshots: *mut usize) -> KcStatus {
    guard(|| {
        let s = sim.as_mut().ok_or_else(|| null("sim"))?;
        if !(minutes.is_finite() && minutes >= 0.0) {
            return Err(Failure(KcStatus::InvalidArgument, format!("bad time {minutes}")));
        }
        let taken = s.sim.run_until(SimTime::from_minutes_f64(minutes)).len();
        if let Some(n) = out_snapshots.as_mut() {
            *n = taken;
        }
        Ok(())
    })
}

/// Current simulated time in minutes, or -1 for NULL.
///
/// # Safety
/// `sim` must be NULL or a live simulation.
#[no_mangle]
pub unsafe extern "C" fn kc_sim_now_minutes(sim: *const KcSimulation) -> f64 {
    sim.as_ref().map_or(-1.0, |s| s.sim.now().as_minutes())
}

/// Number of nodes currently in the overlay, or 0 for NULL.
///
/// # Safety
/// `sim` must be NULL or a live simulation.
#[no_mangle]
pub unsafe extern "C" fn kc_sim_alive_count(sim: *const KcSimulation) -> usize {
    sim.as_ref().map_or(0, |s| s.sim.alive_count())
}

/// Snapshots every routing table now and returns the connectivity graph.
///
/// # Safety
/// `sim` must be a live simulation and `out_graph` valid.
#[no_mangle]
pub unsafe extern "C" fn kc_sim_snapshot_graph(sim: *mut KcSimulation, out_graph: *mut *mut KcGraph) -> KcStatus {
    guard(|| {
        let s = sim.as_mut().ok_or_else(|| null("sim"))?;
        let slot = out(out_graph, "out_graph")?;
        let snap = s.sim.take_snapshot();
        *slot = boxed_graph(DiGraph::from_snapshot(&snap));
        Ok(())
    })
}
