#ifndef TOPICNET_H
#define TOPICNET_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TnStatus {
  TN_STATUS_OK = 0,
  TN_STATUS_NULL_POINTER = 1,
  TN_STATUS_INVALID_UTF8 = 2,
  TN_STATUS_IO = 3,
  TN_STATUS_PARSE = 4,
  TN_STATUS_INVALID_ARGUMENT = 5,
  TN_STATUS_NO_EDGES = 6,
  TN_STATUS_STAGE = 7,
  TN_STATUS_PANIC = 8,
} TnStatus;

typedef enum TnMethod {
  TN_METHOD_LOUVAIN = 0,
  TN_METHOD_LEIDEN = 1,
  TN_METHOD_LABEL_PROPAGATION = 2,
} TnMethod;

typedef enum TnQuality {
  TN_QUALITY_NEWMAN = 0,
  TN_QUALITY_DUGUE = 1,
  TN_QUALITY_POTTS = 2,
} TnQuality;

typedef struct TnCorpus TnCorpus;

typedef struct TnGraph TnGraph;

typedef struct TnPartition TnPartition;

/**
 * Outcome of a permutation significance test.
 */
typedef struct TnSignificance {
  double observed_q;
  /**
   * NaN when the null distribution has zero variance.
   */
  double z;
  double p;
  size_t iterations;
  bool significant;
} TnSignificance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failing call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *tn_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tn_version(void);

/**
 * Loads a JSONL corpus.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TnStatus tn_corpus_load(const char *path, struct TnCorpus **out);

/**
 * Number of documents; 0 for a null handle.
 *
 * # Safety
 * `corpus` must be null or a live handle.
 */
size_t tn_corpus_len(const struct TnCorpus *corpus);

/**
 * # Safety
 * `corpus` must be null or a handle not yet freed.
 */
void tn_corpus_free(struct TnCorpus *corpus);

/**
 * Builds an undirected graph on `n` nodes from `n_edges` pairs stored flat in
 * `pairs` (`2 * n_edges` entries).
 *
 * # Safety
 * `pairs` must point to `2 * n_edges` values (or be null when `n_edges` is 0).
 */
enum TnStatus tn_graph_from_edges(size_t n,
                                  const size_t *pairs,
                                  size_t n_edges,
                                  struct TnGraph **out);

/**
 * Builds the `k`-nearest-neighbour graph of the row-normalized `rows x cols`
 * row-major matrix `data`.
 *
 * # Safety
 * `data` must point to `rows * cols` doubles.
 */
enum TnStatus tn_graph_knn(const double *data,
                           size_t rows,
                           size_t cols,
                           size_t k,
                           struct TnGraph **out);

/**
 * Loads a graph written by the pipeline (`graph.json`).
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TnStatus tn_graph_load(const char *path, struct TnGraph **out);

/**
 * # Safety
 * `graph` must be null or a live handle.
 */
size_t tn_graph_node_count(const struct TnGraph *graph);

/**
 * # Safety
 * `graph` must be null or a live handle.
 */
size_t tn_graph_edge_count(const struct TnGraph *graph);

/**
 * # Safety
 * `graph` must be null or a handle not yet freed.
 */
void tn_graph_free(struct TnGraph *graph);

/**
 * Detects communities. `resolution` is only read for [`TnQuality::Potts`].
 *
 * # Safety
 * `graph` must be a live handle and `out` a valid pointer.
 */
enum TnStatus tn_detect(const struct TnGraph *graph,
                        enum TnMethod method,
                        enum TnQuality quality,
                        double resolution,
                        uint64_t seed,
                        struct TnPartition **out);

/**
 * Quality of an arbitrary assignment of `len` nodes.
 *
 * # Safety
 * `assignment` must point to `len` values and `out` must be valid.
 */
enum TnStatus tn_modularity(const struct TnGraph *graph,
                            const size_t *assignment,
                            size_t len,
                            enum TnQuality quality,
                            double resolution,
                            double *out);

/**
 * # Safety
 * `partition` must be null or a live handle.
 */
size_t tn_partition_len(const struct TnPartition *partition);

/**
 * # Safety
 * `partition` must be null or a live handle.
 */
size_t tn_partition_n_communities(const struct TnPartition *partition);

/**
 * Quality of the partition; NaN for a null handle.
 *
 * # Safety
 * `partition` must be null or a live handle.
 */
double tn_partition_quality(const struct TnPartition *partition);

/**
 * Copies the community of each node into `buf`, which must hold
 * `tn_partition_len(partition)` values.
 *
 * # Safety
 * `buf` must point to `len` writable values.
 */
enum TnStatus tn_partition_assignment(const struct TnPartition *partition, size_t *buf, size_t len);

/**
 * # Safety
 * `partition` must be null or a handle not yet freed.
 */
void tn_partition_free(struct TnPartition *partition);

/**
 * Detects on `graph`, then compares against `iterations` detections on
 * edge-shuffled copies.
 *
 * # Safety
 * `graph` must be a live handle and `out` a valid pointer.
 */
enum TnStatus tn_significance(const struct TnGraph *graph,
                              enum TnMethod method,
                              enum TnQuality quality,
                              double resolution,
                              size_t iterations,
                              uint64_t seed,
                              struct TnSignificance *out);

/**
 * Runs the full pipeline from a TOML config file with `n_overrides` optional
 * `key=value` overrides. On success `*summary_json` receives the run summary,
 * to be released with [`tn_string_free`].
 *
 * # Safety
 * `config_path` must be a NUL-terminated string, `overrides` must point to
 * `n_overrides` NUL-terminated strings (or be null when 0), and `summary_json`
 * must be null or a valid pointer.
 */
enum TnStatus tn_run_pipeline(const char *config_path,
                              const char *const *overrides,
                              size_t n_overrides,
                              char **summary_json);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void tn_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TOPICNET_H */
