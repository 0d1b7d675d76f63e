#ifndef APDP_H
#define APDP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Which planner [`apdp_solve`] runs.
 */
typedef enum ApdpAlgorithm {
  /**
   * Whole fleet, stochastic local search.
   */
  APDP_ALGORITHM_SLS = 0,
  /**
   * First vehicle only, A* with the spanning-tree bound.
   */
  APDP_ALGORITHM_ASTAR = 1,
  /**
   * First vehicle only, uniform-cost search.
   */
  APDP_ALGORITHM_UCS = 2,
  /**
   * First vehicle only, exhaustive layered search.
   */
  APDP_ALGORITHM_BFS = 3,
} ApdpAlgorithm;

/**
 * Result codes. Zero is success.
 */
typedef enum ApdpStatus {
  APDP_STATUS_OK = 0,
  APDP_STATUS_NULL_ARGUMENT = 1,
  APDP_STATUS_INVALID_UTF8 = 2,
  APDP_STATUS_MALFORMED = 3,
  APDP_STATUS_NOT_FOUND = 4,
  APDP_STATUS_INFEASIBLE = 5,
  APDP_STATUS_INVALID_ARGUMENT = 6,
  APDP_STATUS_INTERNAL = 7,
} ApdpStatus;

/**
 * Opaque handle to a loaded road network.
 */
typedef struct ApdpTopology ApdpTopology;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *apdp_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into the library from the same thread.
 */
const char *apdp_last_error_message(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from an `out_json` parameter of this library and must not
 * be used afterwards.
 */
void apdp_string_free(char *s);

/**
 * Loads a bundled topology by name or a topology document from a path.
 *
 * # Safety
 * `name_or_path` must be a valid C string; `out` must be writable.
 */
enum ApdpStatus apdp_topology_load(const char *name_or_path, struct ApdpTopology **out);

/**
 * Builds a topology from a JSON topology document.
 *
 * # Safety
 * `json` must be a valid C string; `out` must be writable.
 */
enum ApdpStatus apdp_topology_from_json(const char *json, struct ApdpTopology **out);

/**
 * Releases a topology handle. NULL is ignored.
 *
 * # Safety
 * `t` must come from a constructor of this library and must not be used
 * afterwards.
 */
void apdp_topology_free(struct ApdpTopology *t);

/**
 * Number of cities, or 0 for a NULL handle.
 *
 * # Safety
 * `t` must be NULL or a live handle.
 */
size_t apdp_topology_num_cities(const struct ApdpTopology *t);

/**
 * Shortest-path distance in km between two cities.
 *
 * # Safety
 * `t` must be a live handle; `out_km` must be writable.
 */
enum ApdpStatus apdp_topology_distance(const struct ApdpTopology *t,
                                       size_t from,
                                       size_t to,
                                       double *out_km);

/**
 * Checks a plan against an instance. Writes
 * `{"ok": bool, "cost": number, "violations": [...]}`.
 *
 * # Safety
 * Pointers must be valid C strings / writable; `t` a live handle.
 */
enum ApdpStatus apdp_validate_plan(const struct ApdpTopology *t,
                                   const char *instance_json,
                                   const char *plan_json,
                                   char **out_json);

/**
 * Cost of a plan: route length times cost per km, summed over vehicles.
 *
 * # Safety
 * Pointers must be valid C strings / writable; `t` a live handle.
 */
enum ApdpStatus apdp_plan_cost(const struct ApdpTopology *t,
                               const char *instance_json,
                               const char *plan_json,
                               double *out_cost);

/**
 * Solves a static instance. Writes `{"cost": number, "plan": {...}}`.
 * `iterations` and `time_ms` bound local search; the exact searches ignore
 * them.
 *
 * # Safety
 * Pointers must be valid C strings / writable; `t` a live handle.
 */
enum ApdpStatus apdp_solve(const struct ApdpTopology *t,
                           const char *instance_json,
                           enum ApdpAlgorithm algorithm,
                           uint64_t iterations,
                           uint64_t time_ms,
                           uint64_t seed,
                           char **out_json);

/**
 * Plays one match between two built-in agents; `agent_a` controls the first
 * company. `config_json` may be NULL for defaults, otherwise a run
 * configuration document. Writes the match result as JSON.
 *
 * # Safety
 * Pointers must be valid C strings (or NULL where allowed) / writable; `t`
 * a live handle.
 */
enum ApdpStatus apdp_run_match(const struct ApdpTopology *t,
                               const char *agent_a,
                               const char *agent_b,
                               const char *config_json,
                               uint64_t seed,
                               char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* APDP_H */
