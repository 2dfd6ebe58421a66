#ifndef NLCONSENSUS_H
#define NLCONSENSUS_H

#include <stdbool.h>
#include <stddef.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum NlcStatus {
  NLC_STATUS_OK = 0,
  NLC_STATUS_NULL_POINTER = 1,
  NLC_STATUS_INVALID_UTF8 = 2,
  NLC_STATUS_PARSE = 3,
  NLC_STATUS_VALIDATION = 4,
  NLC_STATUS_INTEGRATION = 5,
  NLC_STATUS_HYPOTHESIS_VIOLATED = 6,
  NLC_STATUS_OUT_OF_RANGE = 7,
  NLC_STATUS_BUFFER_TOO_SMALL = 8,
  NLC_STATUS_IO = 9,
  NLC_STATUS_NOT_FOUND = 10,
  NLC_STATUS_PANIC = 11,
} NlcStatus;

/**
 * Opaque scenario handle.
 */
typedef struct NlcScenario NlcScenario;

/**
 * Opaque trajectory handle.
 */
typedef struct NlcTrajectory NlcTrajectory;

/**
 * Result of consensus detection. `t_consensus` is NaN when not achieved.
 */
typedef struct NlcConsensus {
  bool achieved;
  double t_consensus;
  double final_spread;
  double final_speed;
} NlcConsensus;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses and validates a scenario from a JSON string.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum NlcStatus nlc_scenario_from_json(const char *json, struct NlcScenario **out);

/**
 * Reads, parses and validates a scenario file.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum NlcStatus nlc_scenario_from_file(const char *path, struct NlcScenario **out);

/**
 * Loads one of the bundled scenarios (`fig2a`, `fig2b`, `fig3a`, `fig3b`).
 *
 * # Safety
 * `name` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum NlcStatus nlc_scenario_bundled(const char *name, struct NlcScenario **out);

/**
 * # Safety
 * `scenario` must be null or a handle returned by this library, freed once.
 */
void nlc_scenario_free(struct NlcScenario *scenario);

/**
 * Number of agents, or 0 for a null handle.
 *
 * # Safety
 * `scenario` must be null or a live handle.
 */
size_t nlc_scenario_n_agents(const struct NlcScenario *scenario);

/**
 * Number of position components per agent, or 0 for a null handle.
 *
 * # Safety
 * `scenario` must be null or a live handle.
 */
size_t nlc_scenario_n_dims(const struct NlcScenario *scenario);

/**
 * Replaces the integration settings. The handle is left unchanged when the
 * new settings are rejected.
 *
 * # Safety
 * `scenario` must be a live handle.
 */
enum NlcStatus nlc_scenario_set_integrator(struct NlcScenario *scenario,
                                           double dt,
                                           double t_end,
                                           size_t record_every);

/**
 * Writes the closed-form consensus value (`n_dims` values) into `out`.
 *
 * # Safety
 * `scenario` must be a live handle and `out` must hold `len` doubles.
 */
enum NlcStatus nlc_predict(const struct NlcScenario *scenario, double *out, size_t len);

/**
 * Integrates the scenario.
 *
 * # Safety
 * `scenario` must be a live handle and `out` a valid pointer.
 */
enum NlcStatus nlc_simulate(const struct NlcScenario *scenario, struct NlcTrajectory **out);

/**
 * # Safety
 * `traj` must be null or a handle returned by this library, freed once.
 */
void nlc_trajectory_free(struct NlcTrajectory *traj);

/**
 * Number of recorded samples, or 0 for a null handle.
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
size_t nlc_trajectory_len(const struct NlcTrajectory *traj);

/**
 * Copies sample `index`: its time, and positions and velocities in
 * agent-major order (`n_agents * n_dims` values each).
 *
 * # Safety
 * `traj` must be a live handle; `t` must be valid; `p` and `q` must hold
 * `p_len` and `q_len` doubles.
 */
enum NlcStatus nlc_trajectory_sample(const struct NlcTrajectory *traj,
                                     size_t index,
                                     double *t,
                                     double *p,
                                     size_t p_len,
                                     double *q,
                                     size_t q_len);

/**
 * Copies the leader state of sample `index` (`n_dims` values each).
 *
 * # Safety
 * `traj` must be a live handle; `p` and `q` must hold `len` doubles each.
 */
enum NlcStatus nlc_trajectory_leader(const struct NlcTrajectory *traj,
                                     size_t index,
                                     double *p,
                                     double *q,
                                     size_t len);

/**
 * Finite-horizon consensus check.
 *
 * # Safety
 * `traj` must be a live handle and `out` a valid pointer.
 */
enum NlcStatus nlc_detect_consensus(const struct NlcTrajectory *traj,
                                    double pos_tol,
                                    double vel_tol,
                                    struct NlcConsensus *out);

/**
 * Message for the most recent failure on this thread, or null. Valid until
 * the next call into this library from the same thread.
 */
const char *nlc_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *nlc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NLCONSENSUS_H */
