#ifndef KADCONN_H
#define KADCONN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KcStatus {
  KC_STATUS_OK = 0,
  KC_STATUS_NULL_POINTER = 1,
  KC_STATUS_INVALID_ARGUMENT = 2,
  KC_STATUS_PARSE = 3,
  KC_STATUS_GRAPH = 4,
  KC_STATUS_PANIC = 5,
} KcStatus;

// A directed connectivity graph.
typedef struct KcGraph KcGraph;

// A running simulation.
typedef struct KcSimulation KcSimulation;

// Result of [`kc_graph_connectivity`].
typedef struct KcReport {
  size_t n;
  size_t m;
  uint32_t kappa_min;
  double kappa_avg;
  // `kappa_min - 1`.
  int64_t resilience;
  size_t sources;
  size_t pairs_computed;
  bool complete_graph;
  bool has_witness;
  // Vertex indices of a pair achieving `kappa_min`, valid if `has_witness`.
  size_t witness_source;
  size_t witness_sink;
} KcReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. Valid until the
// next call into this library from the same thread.
const char *kc_last_error_message(void);

// Parses snapshot text into a graph.
//
// # Safety
// `snapshot` must be a NUL-terminated string and `out` a valid pointer.
enum KcStatus kc_graph_from_snapshot_text(const char *snapshot, struct KcGraph **out_graph);

// Builds a graph on `n` vertices from `edge_count` pairs stored as
// `edges[2i] -> edges[2i + 1]`.
//
// # Safety
// `edges` must point to `2 * edge_count` integers (it may be NULL when
// `edge_count` is 0) and `out_graph` must be valid.
enum KcStatus kc_graph_from_edges(size_t n,
                                  const uint32_t *edges,
                                  size_t edge_count,
                                  struct KcGraph **out_graph);

// # Safety
// `graph` must come from this library and not be freed twice. NULL is ignored.
void kc_graph_free(struct KcGraph *graph);

// Vertex count, or 0 for NULL.
//
// # Safety
// `graph` must be NULL or a live graph.
size_t kc_graph_vertex_count(const struct KcGraph *graph);

// Edge count, or 0 for NULL.
//
// # Safety
// `graph` must be NULL or a live graph.
size_t kc_graph_edge_count(const struct KcGraph *graph);

// Vertex connectivity from `v` to `w`. When the edge `v -> w` exists no
// vertex set separates them: `*out_adjacent` is set and `*out_kappa` is 0.
//
// # Safety
// All pointers must be valid.
enum KcStatus kc_graph_kappa_pair(const struct KcGraph *graph,
                                  size_t v,
                                  size_t w,
                                  uint32_t *out_kappa,
                                  bool *out_adjacent);

// Graph connectivity using a fraction `c` in (0, 1] of the vertices as sources.
//
// # Safety
// All pointers must be valid.
enum KcStatus kc_graph_connectivity(const struct KcGraph *graph,
                                    double c,
                                    struct KcReport *out_report);

// Solves a DIMACS max-flow problem given as text.
//
// # Safety
// `dimacs` must be a NUL-terminated string and `out_flow` valid.
enum KcStatus kc_dimacs_max_flow(const char *dimacs, uint32_t *out_flow);

// Creates scenario number `index` of a key=value config text, ready to run.
//
// # Safety
// `config` must be a NUL-terminated string and `out_sim` valid.
enum KcStatus kc_sim_new(const char *config, size_t index, struct KcSimulation **out_sim);

// # Safety
// `sim` must come from this library and not be freed twice. NULL is ignored.
void kc_sim_free(struct KcSimulation *sim);

// Advances the simulation to `minutes`. Scheduled snapshots taken on the way
// are counted in `*out_snapshots` (may be NULL) and discarded.
//
// # Safety
// `sim` must be a live simulation.
enum KcStatus kc_sim_run_until(struct KcSimulation *sim, double minutes, size_t *out_snapshots);

// Current simulated time in minutes, or -1 for NULL.
//
// # Safety
// `sim` must be NULL or a live simulation.
double kc_sim_now_minutes(const struct KcSimulation *sim);

// Number of nodes currently in the overlay, or 0 for NULL.
//
// # Safety
// `sim` must be NULL or a live simulation.
size_t kc_sim_alive_count(const struct KcSimulation *sim);

// Snapshots every routing table now and returns the connectivity graph.
//
// # Safety
// `sim` must be a live simulation and `out_graph` valid.
enum KcStatus kc_sim_snapshot_graph(struct KcSimulation *sim, struct KcGraph **out_graph);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KADCONN_H */
