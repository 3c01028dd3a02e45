#ifndef BREM_H
#define BREM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum BremStatus {
  BREM_STATUS_OK = 0,
  BREM_STATUS_NULL_POINTER = 1,
  BREM_STATUS_INVALID_INPUT = 2,
  BREM_STATUS_NON_MONOTONE_TIME = 3,
  BREM_STATUS_PARSE = 4,
  BREM_STATUS_RULE_VIOLATION = 5,
  BREM_STATUS_PROTOCOL = 6,
  BREM_STATUS_INCOMPATIBLE = 7,
  BREM_STATUS_INVALID_STATE = 8,
  BREM_STATUS_IO = 9,
  /**
   * A fit finished without meeting its convergence test.
   */
  BREM_STATUS_NOT_CONVERGED = 10,
  BREM_STATUS_PANIC = 11,
} BremStatus;

/**
 * Likelihood used by `brem_fit`.
 */
typedef enum BremLikelihood {
  BREM_LIKELIHOOD_TEMPORAL = 0,
  BREM_LIKELIHOOD_ORDINAL = 1,
} BremLikelihood;

/**
 * Rate model: statistics, coefficients and baseline.
 */
typedef struct BremModel BremModel;

/**
 * Online trust tracker that owns its event history.
 */
typedef struct BremTracker BremTracker;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *brem_last_error(void);

/**
 * Frees a string returned by this library.
 *
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void brem_string_free(char *s);

/**
 * Builds a model from `{"specs": [...], "theta": [...], "baseline": 1.0}`.
 *
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum BremStatus brem_model_new(const char *json, struct BremModel **out);

/**
 * # Safety
 * `model` must be null or a handle from `brem_model_new` not yet freed.
 */
void brem_model_free(struct BremModel *model);

/**
 * Creates a tracker for the dyads `human -> robots[i]`. `priors` may be
 * null; a NaN entry means no reported trust for that robot. `inference_json`
 * may be null for the default settings.
 *
 * # Safety
 * `robots` must point to `n_robots` values, `priors` likewise when not null,
 * and `out` must be writable.
 */
enum BremStatus brem_tracker_new(const struct BremModel *model,
                                 const char *inference_json,
                                 size_t n_actors,
                                 size_t n_types,
                                 size_t human,
                                 const size_t *robots,
                                 const double *priors,
                                 size_t n_robots,
                                 struct BremTracker **out);

/**
 * # Safety
 * `tracker` must be null or a handle from `brem_tracker_new` not yet freed.
 */
void brem_tracker_free(struct BremTracker *tracker);

/**
 * Sets a constant actor attribute used by the rate statistics.
 *
 * # Safety
 * `tracker` must be a live handle and `name` a nul-terminated string.
 */
enum BremStatus brem_tracker_set_actor_attribute(struct BremTracker *tracker,
                                                 size_t actor,
                                                 const char *name,
                                                 double value);

/**
 * Appends one event; times must not decrease.
 *
 * # Safety
 * `tracker` must be a live handle.
 */
enum BremStatus brem_tracker_push_event(struct BremTracker *tracker,
                                        size_t sender,
                                        size_t receiver,
                                        size_t event_type,
                                        double time,
                                        double weight);

/**
 * Absorbs the events up to `t_end` as one window and stores its telemetry.
 *
 * # Safety
 * `tracker` must be a live handle.
 */
enum BremStatus brem_tracker_advance(struct BremTracker *tracker, double t_end);

/**
 * Trust level L_beta and posterior mean for the dyad `human -> robot`.
 *
 * # Safety
 * `tracker` must be a live handle; `level` and `mean` must be writable.
 */
enum BremStatus brem_tracker_trust(const struct BremTracker *tracker,
                                   size_t human,
                                   size_t robot,
                                   double *level,
                                   double *mean);

/**
 * Telemetry of the last window as a JSON array; free with `brem_string_free`.
 *
 * # Safety
 * `tracker` must be a live handle and `out` writable.
 */
enum BremStatus brem_tracker_telemetry_json(const struct BremTracker *tracker, char **out);

/**
 * Seeded compliance draw for a conflicting instruction at autonomy `l_alpha`.
 *
 * # Safety
 * `obey` must be writable.
 */
enum BremStatus brem_decide_compliance(double l_alpha, uint64_t seed, bool *obey);

/**
 * Fits coefficients to a line-delimited event log. `specs_json` lists the
 * statistics; `attrs_json` may be null. The result is a JSON object
 * `{theta, std_errors, log_lik, converged}`, written even when the fit does
 * not converge (status `NotConverged`).
 *
 * # Safety
 * String arguments must be nul-terminated; `out` must be writable.
 */
enum BremStatus brem_fit(const char *events,
                         const char *specs_json,
                         const char *attrs_json,
                         enum BremLikelihood mode,
                         char **out);

/**
 * Runs the paired experiment described by a TOML configuration (null for
 * the defaults) and returns the metrics table as JSON.
 *
 * # Safety
 * `config_toml` must be null or nul-terminated; `out` must be writable.
 */
enum BremStatus brem_compare(const char *config_toml, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BREM_H */
