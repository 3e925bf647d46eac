#ifndef HJSMOOTH_H
#define HJSMOOTH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum HjsStatus {
  HJS_STATUS_OK = 0,
  HJS_STATUS_NULL_POINTER = 1,
  HJS_STATUS_INVALID_ARGUMENT = 2,
  HJS_STATUS_UNKNOWN_OBJECTIVE = 3,
  HJS_STATUS_DIMENSION_MISMATCH = 4,
  HJS_STATUS_NUMERICAL = 5,
  HJS_STATUS_IO = 6,
  HJS_STATUS_CONFIG = 7,
  HJS_STATUS_PANIC = 8,
} HjsStatus;

typedef enum HjsScheme {
  HJS_SCHEME_COLE_HOPF = 0,
  HJS_SCHEME_HOPF_LAX = 1,
  HJS_SCHEME_MONOTONE_FD = 2,
  HJS_SCHEME_HEAT = 3,
} HjsScheme;

typedef enum HjsAlgorithm {
  HJS_ALGORITHM_SGD = 0,
  HJS_ALGORITHM_ENTROPY_SGD = 1,
  HJS_ALGORITHM_HJ = 2,
  HJS_ALGORITHM_HJ2 = 3,
  HJS_ALGORITHM_HEAT = 4,
  HJS_ALGORITHM_ELASTIC = 5,
} HjsAlgorithm;

/**
 * A function sampled on a 1D or 2D grid.
 */
typedef struct HjsGrid HjsGrid;

/**
 * A named objective from the test corpus.
 */
typedef struct HjsObjective HjsObjective;

/**
 * The trajectory of one optimizer run.
 */
typedef struct HjsRunRecord HjsRunRecord;

/**
 * One logged row of a run.
 */
typedef struct HjsRunRow {
  uint64_t k;
  uint64_t grad_evals;
  double effective_epoch;
  double loss;
  double grad_norm;
  double gamma;
  double control_energy;
} HjsRunRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *hjs_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hjs_version(void);

/**
 * Looks up a corpus objective such as `double_well_a1` or `rugged_s7_m5`.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HjsStatus hjs_objective_new(const char *name, struct HjsObjective **out);

/**
 * # Safety
 * `obj` must come from [`hjs_objective_new`] and not be used afterwards. Null is ignored.
 */
void hjs_objective_free(struct HjsObjective *obj);

/**
 * Dimension of the objective, or 0 for a null handle.
 *
 * # Safety
 * `obj` must be a live handle or null.
 */
size_t hjs_objective_dim(const struct HjsObjective *obj);

/**
 * # Safety
 * `x` must point to `n` doubles and `out` to one.
 */
enum HjsStatus hjs_objective_value(const struct HjsObjective *obj,
                                   const double *x,
                                   size_t n,
                                   double *out);

/**
 * # Safety
 * `x` and `grad` must each point to `n` doubles.
 */
enum HjsStatus hjs_objective_gradient(const struct HjsObjective *obj,
                                      const double *x,
                                      size_t n,
                                      double *grad);

/**
 * Solves for u(·, t) on the objective's box with `n_points` nodes per axis.
 *
 * # Safety
 * `obj` must be a live handle and `out` a valid pointer.
 */
enum HjsStatus hjs_solve_pde(const struct HjsObjective *obj,
                             enum HjsScheme scheme,
                             double beta_inv,
                             double t,
                             size_t n_points,
                             struct HjsGrid **out);

/**
 * # Safety
 * `grid` must come from this library and not be used afterwards. Null is ignored.
 */
void hjs_grid_free(struct HjsGrid *grid);

/**
 * Number of nodes, or 0 for a null handle.
 *
 * # Safety
 * `grid` must be a live handle or null.
 */
size_t hjs_grid_len(const struct HjsGrid *grid);

/**
 * Spatial dimension, or 0 for a null handle.
 *
 * # Safety
 * `grid` must be a live handle or null.
 */
size_t hjs_grid_dim(const struct HjsGrid *grid);

/**
 * Copies the node values (row-major, first axis fastest) into `out`.
 *
 * # Safety
 * `out` must point to `len` doubles.
 */
enum HjsStatus hjs_grid_values(const struct HjsGrid *grid, double *out, size_t len);

/**
 * Coordinates of node `index`.
 *
 * # Safety
 * `out` must point to `dim` doubles.
 */
enum HjsStatus hjs_grid_point(const struct HjsGrid *grid, size_t index, double *out, size_t dim);

/**
 * u at an arbitrary point by multilinear interpolation.
 *
 * # Safety
 * `x` must point to `dim` doubles and `out` to one.
 */
enum HjsStatus hjs_grid_interpolate(const struct HjsGrid *grid,
                                    const double *x,
                                    size_t dim,
                                    double *out);

/**
 * Runs an optimizer for `grad_evals` gradient evaluations.
 *
 * `config_json` may be null for the algorithm's defaults, or a JSON object
 * with any optimizer keys (`eta`, `gamma0`, `L`, …); missing keys keep their defaults.
 *
 * # Safety
 * `obj` must be a live handle, `config_json` null or NUL-terminated, `out` valid.
 */
enum HjsStatus hjs_optimize(const struct HjsObjective *obj,
                            enum HjsAlgorithm algorithm,
                            const char *config_json,
                            uint64_t seed,
                            uint64_t grad_evals,
                            struct HjsRunRecord **out);

/**
 * # Safety
 * `rec` must come from [`hjs_optimize`] and not be used afterwards. Null is ignored.
 */
void hjs_run_record_free(struct HjsRunRecord *rec);

/**
 * Number of logged rows, or 0 for a null handle.
 *
 * # Safety
 * `rec` must be a live handle or null.
 */
size_t hjs_run_record_num_rows(const struct HjsRunRecord *rec);

/**
 * Loss at the last logged row; NaN for a null handle.
 *
 * # Safety
 * `rec` must be a live handle or null.
 */
double hjs_run_record_final_loss(const struct HjsRunRecord *rec);

/**
 * Whether the run stopped early on a non-finite value (1) or not (0).
 *
 * # Safety
 * `rec` must be a live handle or null.
 */
int32_t hjs_run_record_aborted(const struct HjsRunRecord *rec);

/**
 * # Safety
 * `out` must point to one [`HjsRunRow`].
 */
enum HjsStatus hjs_run_record_row(const struct HjsRunRecord *rec,
                                  size_t index,
                                  struct HjsRunRow *out);

/**
 * Copies the final iterate into `out`.
 *
 * # Safety
 * `out` must point to `n` doubles.
 */
enum HjsStatus hjs_run_record_terminal_x(const struct HjsRunRecord *rec, double *out, size_t n);

/**
 * Writes the run as CSV.
 *
 * # Safety
 * `path` must be NUL-terminated.
 */
enum HjsStatus hjs_run_record_write_csv(const struct HjsRunRecord *rec, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HJSMOOTH_H */
