#ifndef DRHC_H
#define DRHC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum DrhcStatus {
  DRHC_STATUS_OK = 0,
  DRHC_STATUS_NULL_POINTER = 1,
  DRHC_STATUS_INVALID_UTF8 = 2,
  DRHC_STATUS_CONFIG_ERROR = 3,
  DRHC_STATUS_RUNTIME_ERROR = 4,
  DRHC_STATUS_PANIC = 5,
} DrhcStatus;

/**
 * Opaque scenario handle.
 */
typedef struct DrhcScenario DrhcScenario;

/**
 * Cost weights and shape constants.
 */
typedef struct DrhcCostProfile {
  double w_eta;
  double w_z;
  double w_g;
  double delta_min;
  double c_penalty;
  double alpha;
  double c_dist;
  double z_min;
  double z_max;
} DrhcCostProfile;

/**
 * Plain-data summary of one trial.
 */
typedef struct DrhcTrialOutcome {
  uint64_t seed;
  uint64_t n_agents;
  double duration;
  double fraction_searched;
  uint64_t searched_tiles;
  uint64_t total_tiles;
  uint64_t collisions;
  double heuristic;
} DrhcTrialOutcome;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the next
 * failing call on the same thread.
 */
const char *drhc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *drhc_version(void);

/**
 * Parses and validates a scenario from NUL-terminated TOML text.
 *
 * # Safety
 * `toml` must be a valid C string and `out` a valid pointer.
 */
enum DrhcStatus drhc_scenario_from_toml(const char *toml, struct DrhcScenario **out);

/**
 * Releases a scenario. Null is ignored.
 *
 * # Safety
 * `scenario` must come from [`drhc_scenario_from_toml`] and not be used afterwards.
 */
void drhc_scenario_free(struct DrhcScenario *scenario);

/**
 * Number of agents in the scenario, or 0 for null.
 *
 * # Safety
 * `scenario` must be null or a live handle.
 */
uint64_t drhc_scenario_n_agents(const struct DrhcScenario *scenario);

/**
 * Replaces the scenario's cost profile after validating it.
 *
 * # Safety
 * Both pointers must be valid.
 */
enum DrhcStatus drhc_scenario_set_profile(struct DrhcScenario *scenario,
                                          const struct DrhcCostProfile *profile);

/**
 * Runs one trial of the scenario with `seed`.
 *
 * # Safety
 * `scenario` must be a live handle and `out` a valid pointer.
 */
enum DrhcStatus drhc_run_trial(const struct DrhcScenario *scenario,
                               uint64_t seed,
                               struct DrhcTrialOutcome *out);

/**
 * Writes the default cost profile to `out`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum DrhcStatus drhc_profile_default(struct DrhcCostProfile *out);

/**
 * Altitude-band cost of `z`.
 *
 * # Safety
 * `profile` and `out` must be valid pointers.
 */
enum DrhcStatus drhc_safety_cost(double z, const struct DrhcCostProfile *profile, double *out);

/**
 * Goal cost between a candidate and a goal, each three doubles.
 *
 * # Safety
 * `candidate` and `goal` must point to 3 doubles; `profile` and `out` must be valid.
 */
enum DrhcStatus drhc_goal_cost(const double *candidate,
                               const double *goal,
                               const struct DrhcCostProfile *profile,
                               double *out);

/**
 * Cohesion cost of a candidate against `n` neighbor positions stored as `3n`
 * consecutive doubles.
 *
 * # Safety
 * `candidate` must point to 3 doubles, `neighbors` to `3 * n` doubles (or be null
 * when `n` is 0); `profile` and `out` must be valid.
 */
enum DrhcStatus drhc_cohesion_cost(const double *candidate,
                                   const double *neighbors,
                                   size_t n,
                                   double comm_range,
                                   const struct DrhcCostProfile *profile,
                                   double *out);

/**
 * Trial heuristic from its components.
 */
double drhc_heuristic(double duration,
                      double fraction_searched,
                      uint64_t collisions,
                      double t_max,
                      uint64_t n_agents);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DRHC_H */
