#ifndef PARREP_H
#define PARREP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ParrepStatus {
  PARREP_STATUS_OK = 0,
  PARREP_STATUS_NULL_POINTER = 1,
  PARREP_STATUS_INVALID_UTF8 = 2,
  PARREP_STATUS_BUFFER_TOO_SMALL = 3,
  PARREP_STATUS_INVALID_NETWORK = 10,
  PARREP_STATUS_INVALID_STATE = 11,
  PARREP_STATUS_INVALID_PARAMS = 12,
  PARREP_STATUS_UNKNOWN_MODEL = 13,
  PARREP_STATUS_ABSORBING_STATE = 14,
  PARREP_STATUS_ALL_REPLICAS_EXITED = 15,
  PARREP_STATUS_EMPTY_WINDOW = 16,
  PARREP_STATUS_INSUFFICIENT_SAMPLES = 17,
  PARREP_STATUS_NEGATIVE_QUADRATIC_FORM = 18,
  PARREP_STATUS_BOX_TOO_SMALL = 19,
  PARREP_STATUS_REDUCIBLE = 20,
  PARREP_STATUS_SINGULAR_SYSTEM = 21,
  PARREP_STATUS_SCHEMA = 22,
  PARREP_STATUS_IO = 23,
  PARREP_STATUS_PANIC = 99,
} ParrepStatus;

/**
 * Opaque reaction network.
 */
typedef struct ParrepNetwork ParrepNetwork;

/**
 * Opaque result of one trajectory.
 */
typedef struct ParrepReport ParrepReport;

/**
 * Settings of one ParRep trajectory.
 */
typedef struct ParrepConfig {
  /**
   * Species whose population defines the regions.
   */
  size_t region_species;
  /**
   * Increasing cut points; region `i` holds states above exactly `i` cuts.
   */
  const double *cuts;
  size_t n_cuts;
  uint64_t decorrelation;
  uint64_t dephasing;
  size_t replicas;
  double t_end;
  /**
   * Start of the recording window.
   */
  double record_from;
  uint64_t seed;
  uint32_t trajectory;
} ParrepConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t parrep_last_error_message(char *buf, size_t len);

/**
 * Creates a built-in network (`"schlogl"` or `"genetic-switch"`).
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum ParrepStatus parrep_network_builtin(const char *name, struct ParrepNetwork **out);

/**
 * Parses a network file.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum ParrepStatus parrep_network_parse(const char *text, struct ParrepNetwork **out);

/**
 * # Safety
 * `net` must be null or a handle from this library that was not freed yet.
 */
void parrep_network_free(struct ParrepNetwork *net);

/**
 * Writes the numbers of species, reactions and parameters.
 *
 * # Safety
 * `net` must be a live handle; the output pointers must be writable.
 */
enum ParrepStatus parrep_network_dims(const struct ParrepNetwork *net,
                                      size_t *species,
                                      size_t *reactions,
                                      size_t *params);

/**
 * Propensities `λ_j(x)` of every channel.
 *
 * # Safety
 * `x` must hold `n` values and `out` `m` writable values.
 */
enum ParrepStatus parrep_network_propensities(const struct ParrepNetwork *net,
                                              const int64_t *x,
                                              size_t n,
                                              double *out,
                                              size_t m);

/**
 * Row-major `reactions × params` matrix of `∂λ_j/∂c_k`.
 *
 * # Safety
 * `x` must hold `n` values and `out` `len` writable values.
 */
enum ParrepStatus parrep_network_gradients(const struct ParrepNetwork *net,
                                           const int64_t *x,
                                           size_t n,
                                           double *out,
                                           size_t len);

/**
 * Plain SSA trajectory on `[0, t_end]`, recording species populations and the
 * FIM integrand after `record_from`. An interrupted run still yields a report
 * (see [`parrep_report_interrupted`]) together with the error status.
 *
 * # Safety
 * `x0` must hold `n` values; `out` must be writable.
 */
enum ParrepStatus parrep_run_ssa(const struct ParrepNetwork *net,
                                 const int64_t *x0,
                                 size_t n,
                                 double t_end,
                                 double record_from,
                                 uint64_t seed,
                                 uint32_t trajectory,
                                 struct ParrepReport **out);

/**
 * One ParRep trajectory. Reporting as for [`parrep_run_ssa`].
 *
 * # Safety
 * `x0` must hold `n` values, `cfg` must be valid with `cfg.cuts` holding
 * `cfg.n_cuts` values; `out` must be writable.
 */
enum ParrepStatus parrep_run_parrep(const struct ParrepNetwork *net,
                                    const int64_t *x0,
                                    size_t n,
                                    const struct ParrepConfig *cfg,
                                    struct ParrepReport **out);

/**
 * # Safety
 * `report` must be null or a live handle from this library.
 */
void parrep_report_free(struct ParrepReport *report);

/**
 * Final clock of the trajectory.
 *
 * # Safety
 * `report` must be a live handle.
 */
double parrep_report_clock(const struct ParrepReport *report);

/**
 * Simulated time inside the recording window.
 *
 * # Safety
 * `report` must be a live handle.
 */
double parrep_report_sampled_time(const struct ParrepReport *report);

/**
 * Number of parallel phases the trajectory ran (0 for SSA).
 *
 * # Safety
 * `report` must be a live handle.
 */
size_t parrep_report_parallel_phases(const struct ParrepReport *report);

/**
 * Whether the trajectory stopped on an error before `t_end`.
 *
 * # Safety
 * `report` must be a live handle.
 */
bool parrep_report_interrupted(const struct ParrepReport *report);

/**
 * Time-averaged population of every species over the recording window.
 *
 * # Safety
 * `out` must hold `len` writable values.
 */
enum ParrepStatus parrep_report_averages(const struct ParrepReport *report,
                                         double *out,
                                         size_t len);

/**
 * Row-major `params × params` time-averaged FIM integrand.
 *
 * # Safety
 * `out` must hold `len` writable values.
 */
enum ParrepStatus parrep_report_fim(const struct ParrepReport *report, double *out, size_t len);

/**
 * Stationary mean of `species` and `∂/∂c_k` of it for every parameter, from
 * the truncated CME on the box `[lo, hi]`.
 *
 * # Safety
 * `lo` and `hi` must hold `n` values; `mean` must be writable; `sens` must
 * hold `len` writable values.
 */
enum ParrepStatus parrep_cme_stationary(const struct ParrepNetwork *net,
                                        const int64_t *lo,
                                        const int64_t *hi,
                                        size_t n,
                                        size_t species,
                                        double *mean,
                                        double *sens,
                                        size_t len);

/**
 * `sqrt(iaf) · sqrt(vᵀ fim v)` for a row-major `l × l` matrix.
 *
 * # Safety
 * `fim` must hold `l*l` values, `v` `l` values; `out` must be writable.
 */
enum ParrepStatus parrep_sensitivity_bound(double iaf,
                                           const double *fim,
                                           const double *v,
                                           size_t l,
                                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PARREP_H */
