#ifndef XAIDROP_H
#define XAIDROP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum XaidropStatus {
  XAIDROP_STATUS_OK = 0,
  XAIDROP_STATUS_NULL_POINTER = 1,
  XAIDROP_STATUS_INVALID_ARGUMENT = 2,
  XAIDROP_STATUS_CONFIG = 3,
  XAIDROP_STATUS_IO = 4,
  XAIDROP_STATUS_LOAD = 5,
  XAIDROP_STATUS_NUMERIC = 6,
  XAIDROP_STATUS_PANIC = 7,
} XaidropStatus;

typedef enum XaidropMapping {
  XAIDROP_MAPPING_GAUSSIAN_YEO_JOHNSON = 0,
  XAIDROP_MAPPING_EMPIRICAL_CDF = 1,
  XAIDROP_MAPPING_UNIFORM = 2,
} XaidropMapping;

// Opaque dataset handle.
typedef struct XaidropDataset XaidropDataset;

// Clamp range and spread of the probability mapping.
typedef struct XaidropMappingParams {
  double floor;
  double ceiling;
  double spread_divisor;
} XaidropMappingParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null if none. Valid
// until the next failing call on the same thread.
const char *xaidrop_last_error_message(void);

struct XaidropMappingParams xaidrop_mapping_params_default(void);

// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum XaidropStatus xaidrop_dataset_load(const char *path, struct XaidropDataset **out);

// Barabási–Albert base graph with attached house motifs.
//
// # Safety
// `out` must be a valid pointer.
enum XaidropStatus xaidrop_dataset_ba_house(size_t base_nodes,
                                            size_t attach_edges_per_node,
                                            size_t num_houses,
                                            uint64_t seed,
                                            struct XaidropDataset **out);

// # Safety
// `ds` must be null or a handle from this library that was not freed yet.
void xaidrop_dataset_free(struct XaidropDataset *ds);

// Writes node, undirected edge, feature and class counts.
//
// # Safety
// `ds` must be a live handle; the out pointers must be valid.
enum XaidropStatus xaidrop_dataset_sizes(const struct XaidropDataset *ds,
                                         size_t *num_nodes,
                                         size_t *num_edges,
                                         size_t *num_features,
                                         size_t *num_classes);

// Runs the experiment described by a TOML config on `ds` (or, if `ds` is
// null, on the config's own data source) and writes the result files to
// `out_dir`.
//
// # Safety
// `config_toml` and `out_dir` must be NUL-terminated strings; `ds` must be
// null or a live handle.
enum XaidropStatus xaidrop_run(const struct XaidropDataset *ds,
                               const char *config_toml,
                               const char *out_dir);

// Yeo-Johnson transform of one value.
//
// # Safety
// `out` must be a valid pointer.
enum XaidropStatus xaidrop_yeo_johnson(double x, double lambda, double *out);

// Maximum-likelihood Yeo-Johnson λ. `degenerate` is set to 1 when the input
// has fewer than two distinct values, in which case λ is 1.
//
// # Safety
// `xs` must point to `len` doubles; the out pointers must be valid.
enum XaidropStatus xaidrop_fit_lambda(const double *xs,
                                      size_t len,
                                      double *lambda,
                                      int32_t *degenerate);

// Maps fidelity-sufficiency scores to dropping probabilities with mean `p`.
// `params` may be null for the defaults.
//
// # Safety
// `fsuf` and `out` must each point to `len` doubles; `params` must be null
// or valid.
enum XaidropStatus xaidrop_map_to_probabilities(const double *fsuf,
                                                size_t len,
                                                double p,
                                                enum XaidropMapping mapping,
                                                const struct XaidropMappingParams *params,
                                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* XAIDROP_H */
