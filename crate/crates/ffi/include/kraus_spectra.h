#ifndef KRAUS_SPECTRA_H
#define KRAUS_SPECTRA_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Largest `p` whose pairing count fits in `u64`.
 */
#define KS_MAX_NC2_ORDER 73

typedef enum KsStatus {
  KS_STATUS_OK = 0,
  KS_STATUS_NULL_POINTER = 1,
  KS_STATUS_INVALID_ARGUMENT = 2,
  KS_STATUS_CONFIG = 3,
  KS_STATUS_DENSE_LIMIT = 4,
  KS_STATUS_NUMERICAL = 5,
  KS_STATUS_IO = 6,
  KS_STATUS_PANIC = 7,
} KsStatus;

typedef enum KsLaw {
  KS_LAW_RADEMACHER = 0,
  KS_LAW_SEMICIRCLE = 1,
  KS_LAW_CENTERED_MP = 2,
} KsLaw;

typedef enum KsDensity {
  KS_DENSITY_SEMICIRCLE = 0,
  KS_DENSITY_KESTEN_MCKAY = 1,
  KS_DENSITY_DILATED_KESTEN_MCKAY = 2,
} KsDensity;

/**
 * Parsed experiment configuration.
 */
typedef struct KsExperiment KsExperiment;

/**
 * Finished simulation.
 */
typedef struct KsSimulation KsSimulation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Free with
 * [`ks_string_free`].
 */
char *ks_last_error_message(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void ks_string_free(char *s);

/**
 * Library version as a static string; do not free.
 */
const char *ks_version(void);

/**
 * Parses a TOML experiment configuration.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum KsStatus ks_experiment_from_toml(const char *toml, struct KsExperiment **out);

/**
 * # Safety
 * `exp` must be null or a handle from [`ks_experiment_from_toml`].
 */
void ks_experiment_free(struct KsExperiment *exp);

/**
 * Runs all trials on `threads` workers (0 = all cores).
 *
 * # Safety
 * `exp` must be a live experiment handle; `out` must be writable.
 */
enum KsStatus ks_experiment_run(const struct KsExperiment *exp,
                                size_t threads,
                                struct KsSimulation **out);

/**
 * # Safety
 * `sim` must be null or a handle from [`ks_experiment_run`].
 */
void ks_simulation_free(struct KsSimulation *sim);

/**
 * Number of moment orders in the report (0 for a null handle).
 *
 * # Safety
 * `sim` must be null or a live simulation handle.
 */
size_t ks_simulation_moment_count(const struct KsSimulation *sim);

/**
 * Copies across-trial mean moments and their standard errors; either output
 * may be null.
 *
 * # Safety
 * Non-null outputs must hold `len` doubles.
 */
enum KsStatus ks_simulation_moments(const struct KsSimulation *sim,
                                    double *empirical,
                                    double *std_err,
                                    size_t len);

/**
 * Size of the pooled eigenvalue sample (0 on the matrix-free path).
 *
 * # Safety
 * `sim` must be null or a live simulation handle.
 */
size_t ks_simulation_eigenvalue_count(const struct KsSimulation *sim);

/**
 * Copies the sorted pooled eigenvalues.
 *
 * # Safety
 * `out` must hold `len` doubles.
 */
enum KsStatus ks_simulation_eigenvalues(const struct KsSimulation *sim, double *out, size_t len);

/**
 * The report as JSON. Free with [`ks_string_free`].
 *
 * # Safety
 * `sim` must be a live simulation handle; `out` must be writable.
 */
enum KsStatus ks_simulation_report_json(const struct KsSimulation *sim, char **out);

/**
 * Predicted limit moments `p = 1..=p_max` into `out`. `d = 0` selects the
 * growing-`d` (semicircle) limit, otherwise the fixed-`d` limit with `d`
 * copies of `law`.
 *
 * # Safety
 * `out` must hold `len ≥ p_max` doubles.
 */
enum KsStatus ks_predict_moments(size_t d,
                                 enum KsLaw law_kind,
                                 size_t p_max,
                                 double *out,
                                 size_t len);

/**
 * Density and CDF at `x`; `d` is ignored for the semicircle.
 *
 * # Safety
 * `density` and `cdf` must be writable or null.
 */
enum KsStatus ks_density(enum KsDensity kind, size_t d, double x, double *density, double *cdf);

/**
 * Number of noncrossing pairings of `p` points.
 *
 * # Safety
 * `out` must be writable.
 */
enum KsStatus ks_nc2_count(size_t p, uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KRAUS_SPECTRA_H */
