#ifndef SBMTC_H
#define SBMTC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum SbmtcStatus {
  SBMTC_STATUS_OK = 0,
  SBMTC_STATUS_NULL_POINTER = 1,
  SBMTC_STATUS_INVALID_ARGUMENT = 2,
  SBMTC_STATUS_PARSE = 3,
  SBMTC_STATUS_IO = 4,
  SBMTC_STATUS_INFEASIBLE = 5,
  SBMTC_STATUS_NUMERICAL = 6,
  SBMTC_STATUS_BUFFER_TOO_SMALL = 7,
  SBMTC_STATUS_PANIC = 8,
} SbmtcStatus;

// Markov chain over decompositions of one graph.
typedef struct SbmtcChain SbmtcChain;

// Observed simple graph.
typedef struct SbmtcGraph SbmtcGraph;

// Sampler settings understood by [`sbmtc_chain_new`].
typedef struct SbmtcChainConfig {
  // Total sweeps including burn-in.
  uint64_t sweeps;
  uint64_t burn_in;
  uint64_t thin;
  // Closure generations; zero samples the plain block model.
  uint8_t layers;
  uint64_t seed;
} SbmtcChainConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null if none. The
// pointer stays valid until the next failing call on this thread.
const char *sbmtc_last_error(void);

// Library version as a static nul-terminated string.
const char *sbmtc_version(void);

// Defaults matching the library's `ChainConfig`.
struct SbmtcChainConfig sbmtc_chain_config_default(void);

// Builds a graph on `nodes` nodes from `count` pairs stored as
// `pairs[2k], pairs[2k + 1]`. Repeated pairs collapse; self-loops fail.
//
// # Safety
// `pairs` must point to `2 * count` readable values (or be null when
// `count` is zero) and `out` must be writable.
enum SbmtcStatus sbmtc_graph_new(size_t nodes,
                                 const uint32_t *pairs,
                                 size_t count,
                                 struct SbmtcGraph **out);

// Parses an edge list: one `i j` pair per line, `#` comments, optional
// `# nodes N` header.
//
// # Safety
// `text` must be a nul-terminated string and `out` writable.
enum SbmtcStatus sbmtc_graph_parse(const char *text, struct SbmtcGraph **out);

// # Safety
// `g` must come from this library and not be used afterwards.
void sbmtc_graph_free(struct SbmtcGraph *g);

// # Safety
// `g` must be a live graph handle.
size_t sbmtc_graph_node_count(const struct SbmtcGraph *g);

// # Safety
// `g` must be a live graph handle.
size_t sbmtc_graph_edge_count(const struct SbmtcGraph *g);

// Copies the edges as `out[2k], out[2k + 1]` in the order used by every
// per-edge array of this API. `len` counts `u32` slots.
//
// # Safety
// `g` must be live and `out` must hold `len` writable values.
enum SbmtcStatus sbmtc_graph_edges(const struct SbmtcGraph *g, uint32_t *out, size_t len);

// Global clustering coefficient; writes NaN for graphs without a
// connected triple.
//
// # Safety
// `g` must be live and `out` writable.
enum SbmtcStatus sbmtc_graph_clustering(const struct SbmtcGraph *g, double *out);

// Starts a chain on a copy of `g`; the graph handle may be freed
// afterwards.
//
// # Safety
// `g` and `config` must be valid and `out` writable.
enum SbmtcStatus sbmtc_chain_new(const struct SbmtcGraph *g,
                                 const struct SbmtcChainConfig *config,
                                 struct SbmtcChain **out);

// # Safety
// `c` must come from this library and not be used afterwards.
void sbmtc_chain_free(struct SbmtcChain *c);

// Runs the remaining sweeps of the configured schedule.
//
// # Safety
// `c` must be a live chain handle.
enum SbmtcStatus sbmtc_chain_run(struct SbmtcChain *c);

// Runs up to `sweeps` more sweeps, stopping at the end of the schedule.
//
// # Safety
// `c` must be a live chain handle.
enum SbmtcStatus sbmtc_chain_run_for(struct SbmtcChain *c, uint64_t sweeps);

// # Safety
// `c` must be a live chain handle.
uint64_t sbmtc_chain_sweeps_done(const struct SbmtcChain *c);

// Log joint probability of the current state, in nats.
//
// # Safety
// `c` must be a live chain handle.
double sbmtc_chain_log_prob(const struct SbmtcChain *c);

// # Safety
// `c` must be a live chain handle.
size_t sbmtc_chain_num_groups(const struct SbmtcChain *c);

// Current group label of every node; `len` must be at least the node
// count.
//
// # Safety
// `c` must be live and `out` must hold `len` writable values.
enum SbmtcStatus sbmtc_chain_labels(const struct SbmtcChain *c, uint32_t *out, size_t len);

// Posterior probability that each edge is seminal, over the samples
// retained so far, in graph edge order.
//
// # Safety
// `c` must be live and `out` must hold `len` writable values.
enum SbmtcStatus sbmtc_chain_seminal_marginals(const struct SbmtcChain *c, double *out, size_t len);

// Posterior summary of the retained samples as a JSON string, to be
// released with [`sbmtc_string_free`].
//
// # Safety
// `c` must be live and `out` writable.
enum SbmtcStatus sbmtc_chain_summary_json(const struct SbmtcChain *c, char **out);

// # Safety
// `s` must come from this library and not be used afterwards.
void sbmtc_string_free(char *s);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SBMTC_H */
