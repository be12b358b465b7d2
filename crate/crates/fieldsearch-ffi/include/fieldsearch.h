/* C interface to the fieldsearch drone search simulator. */

#ifndef FIELDSEARCH_H
#define FIELDSEARCH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call. `FS_STATUS_OK` is zero; anything else
 * indicates failure and leaves a message in `fs_last_error`.
 */
typedef enum FsStatus {
  FS_STATUS_OK = 0,
  /**
   * A pointer was null or a buffer had the wrong length.
   */
  FS_STATUS_INVALID_ARGUMENT = 1,
  /**
   * The configuration document failed validation.
   */
  FS_STATUS_CONFIG = 2,
  /**
   * The call broke a library precondition.
   */
  FS_STATUS_CONTRACT = 3,
  /**
   * A required file does not exist.
   */
  FS_STATUS_MISSING_FILE = 4,
  /**
   * Malformed JSON, CSV or checkpoint data.
   */
  FS_STATUS_PARSE = 5,
  FS_STATUS_IO = 6,
  /**
   * An unexpected internal failure (a bug, not caller error).
   */
  FS_STATUS_INTERNAL = 7,
} FsStatus;

/**
 * Which per-cell map `fs_env_read_map` copies out.
 */
typedef enum FsMap {
  /**
   * Ground-truth object cells.
   */
  FS_MAP_OCCUPANCY = 0,
  /**
   * The episode's prior-knowledge map.
   */
  FS_MAP_PRIOR = 1,
  /**
   * Cells marked found by detections so far.
   */
  FS_MAP_FOUND = 2,
  /**
   * Cells the FOV has covered so far.
   */
  FS_MAP_COVERAGE = 3,
} FsMap;

/**
 * One search episode: the field, its prior map, and the drone state.
 */
typedef struct FsEnv FsEnv;

/**
 * A trained Q-network loaded from a checkpoint file.
 */
typedef struct FsPolicy FsPolicy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Crate version as a static string; never null.
 */
const char *fs_version(void);

/**
 * Message for the most recent failure on the calling thread, or an
 * empty string. The pointer stays valid until the thread's next failing
 * fieldsearch call.
 */
const char *fs_last_error(void);

/**
 * Build an episode environment from a run-configuration JSON document
 * (the same schema the CLI's `--config` accepts). The field, prior map
 * and observation noise streams all derive from `seed`.
 *
 * On success writes a handle to `out_env`; free it with `fs_env_free`.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string and `out_env` a valid
 * pointer.
 */
enum FsStatus fs_env_new(const char *config_json, uint64_t seed, struct FsEnv **out_env);

/**
 * Release an environment handle. Passing null is a no-op.
 *
 * # Safety
 * `env` must be a handle from `fs_env_new` that has not been freed.
 */
void fs_env_free(struct FsEnv *env);

/**
 * Apply one action (an `FS_ACTION_*` value). Writes the step's reward
 * and whether the episode ended. Stepping a finished episode fails with
 * `FS_STATUS_CONTRACT`.
 *
 * # Safety
 * All pointers must be valid; `env` must be a live `fs_env_new` handle.
 */
enum FsStatus fs_env_step(struct FsEnv *env, int32_t action, double *out_reward, bool *out_done);

/**
 * Field side length in cells.
 *
 * # Safety
 * `env` must be a live `fs_env_new` handle.
 */
uint32_t fs_env_grid_size(const struct FsEnv *env);

/**
 * Drone position, remaining battery fraction and episode-done flag.
 * Null out-pointers are skipped.
 *
 * # Safety
 * `env` must be a live `fs_env_new` handle; non-null out-pointers must
 * be valid.
 */
enum FsStatus fs_env_state(const struct FsEnv *env,
                           uint32_t *out_drone_x,
                           uint32_t *out_drone_y,
                           double *out_battery_frac,
                           bool *out_done);

/**
 * Copy one binary map into `buf` as row-major 0/1 bytes. `buf_len`
 * must equal `grid_size * grid_size`.
 *
 * # Safety
 * `env` must be a live `fs_env_new` handle and `buf` must point to at
 * least `buf_len` writable bytes.
 */
enum FsStatus fs_env_read_map(const struct FsEnv *env,
                              enum FsMap which,
                              uint8_t *buf,
                              size_t buf_len);

/**
 * Precision and recall of the found map against the ground truth, plus
 * the number of actions taken so far. Null out-pointers are skipped.
 *
 * # Safety
 * `env` must be a live `fs_env_new` handle; non-null out-pointers must
 * be valid.
 */
enum FsStatus fs_env_score(const struct FsEnv *env,
                           double *out_precision,
                           double *out_recall,
                           uint64_t *out_steps);

/**
 * Load a trained policy from a checkpoint file written by the trainer.
 * On success writes a handle to `out_policy`; free it with
 * `fs_policy_free`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out_policy` a valid
 * pointer.
 */
enum FsStatus fs_policy_load(const char *path, struct FsPolicy **out_policy);

/**
 * Release a policy handle. Passing null is a no-op.
 *
 * # Safety
 * `policy` must be a handle from `fs_policy_load` that has not been
 * freed.
 */
void fs_policy_free(struct FsPolicy *policy);

/**
 * Greedy action of the policy in the environment's current state,
 * written to `out_action` as an `FS_ACTION_*` value. Fails with
 * `FS_STATUS_CONTRACT` when the policy was trained for a different
 * field or FOV geometry.
 *
 * # Safety
 * `policy` and `env` must be live handles and `out_action` a valid
 * pointer.
 */
enum FsStatus fs_policy_action(const struct FsPolicy *policy,
                               const struct FsEnv *env,
                               int32_t *out_action);

/**
 * Static name of an `FS_ACTION_*` value ("north", "south", "west",
 * "east", "land"), or null for an unknown value.
 */
const char *fs_action_name(int32_t action);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FIELDSEARCH_H */
