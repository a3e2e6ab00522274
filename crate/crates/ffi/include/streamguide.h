#ifndef STREAMGUIDE_H
#define STREAMGUIDE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SgStatus {
  SG_STATUS_OK = 0,
  SG_STATUS_NULL_ARGUMENT = 1,
  SG_STATUS_INVALID_UTF8 = 2,
  SG_STATUS_PARSE = 3,
  SG_STATUS_INVALID = 4,
  SG_STATUS_IO = 5,
  SG_STATUS_OUT_OF_RANGE = 6,
  SG_STATUS_SINGULAR = 7,
  SG_STATUS_PANIC = 8,
} SgStatus;

typedef enum SgOutcome {
  SG_OUTCOME_REACHED = 0,
  SG_OUTCOME_TIMEOUT = 1,
  SG_OUTCOME_FAULT = 2,
} SgOutcome;

/**
 * Completed simulation with its full trace.
 */
typedef struct SgRun SgRun;

/**
 * Parsed, validated scenario.
 */
typedef struct SgScenario SgScenario;

typedef struct SgSummary {
  enum SgOutcome outcome;
  /**
   * NaN unless the target was reached.
   */
  double arrival_time;
  double final_time;
  double final_distance;
  double path_length;
  double max_z_p;
  /**
   * Smallest clearance-to-radius ratio over all obstacles (infinity if none).
   */
  double min_clearance_ratio;
  uint32_t waypoints;
  uint32_t segments;
  double max_junction_mismatch;
} SgSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *sg_version(void);

/**
 * Message for the last failed call on this thread, or NULL. The pointer is
 * valid until the next `sg_*` call on the same thread.
 */
const char *sg_last_error_message(void);

/**
 * Parse a scenario from TOML text.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum SgStatus sg_scenario_from_toml(const char *toml, struct SgScenario **out);

/**
 * Load a scenario from a TOML file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SgStatus sg_scenario_from_file(const char *path, struct SgScenario **out);

/**
 * One of the bundled scenarios by name.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum SgStatus sg_scenario_bundled(const char *name, struct SgScenario **out);

/**
 * # Safety
 * `scenario` must come from an `sg_scenario_*` constructor (or be NULL) and
 * not be used afterwards.
 */
void sg_scenario_free(struct SgScenario *scenario);

/**
 * # Safety
 * Pointers must be valid or NULL.
 */
enum SgStatus sg_scenario_obstacle_count(const struct SgScenario *scenario, size_t *out);

/**
 * Composite stream function at `(x, y)` with the initial obstacle snapshot,
 * spins evaluated for the current waypoint `(wp_x, wp_y)`.
 *
 * # Safety
 * Pointers must be valid or NULL.
 */
enum SgStatus sg_stream_function(const struct SgScenario *scenario,
                                 double wp_x,
                                 double wp_y,
                                 double x,
                                 double y,
                                 double *out);

/**
 * Simulate the scenario to completion. A fault or timeout inside the run is
 * not an error here; query it with `sg_run_outcome`.
 *
 * # Safety
 * Pointers must be valid or NULL.
 */
enum SgStatus sg_run(const struct SgScenario *scenario, struct SgRun **out);

/**
 * # Safety
 * `run` must come from `sg_run` (or be NULL) and not be used afterwards.
 */
void sg_run_free(struct SgRun *run);

/**
 * Outcome of the run. For faults the reason is also left in the last-error
 * slot.
 *
 * # Safety
 * Pointers must be valid or NULL.
 */
enum SgStatus sg_run_outcome(const struct SgRun *run, enum SgOutcome *out);

/**
 * # Safety
 * Pointers must be valid or NULL.
 */
enum SgStatus sg_run_summary(const struct SgRun *run, struct SgSummary *out);

/**
 * # Safety
 * Pointers must be valid or NULL.
 */
enum SgStatus sg_run_row_count(const struct SgRun *run, size_t *out);

/**
 * Own-ship pose at trace row `index`.
 *
 * # Safety
 * Pointers must be valid or NULL; `psi` may be NULL.
 */
enum SgStatus sg_run_position(const struct SgRun *run,
                              size_t index,
                              double *x,
                              double *y,
                              double *psi);

/**
 * Write the tick trace as CSV.
 *
 * # Safety
 * Pointers must be valid or NULL.
 */
enum SgStatus sg_run_write_trace(const struct SgRun *run, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STREAMGUIDE_H */
