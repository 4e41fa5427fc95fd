#ifndef CCL_H
#define CCL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CclStatus {
  CCL_STATUS_OK = 0,
  CCL_STATUS_NULL_POINTER = 1,
  CCL_STATUS_INVALID_ARGUMENT = 2,
  CCL_STATUS_DIMENSION_MISMATCH = 3,
  CCL_STATUS_INSUFFICIENT_MEMORY = 4,
  CCL_STATUS_CONFIG = 5,
  CCL_STATUS_ENVIRONMENT = 6,
  /*
   The call panicked; the handle should be considered poisoned.
   */
  CCL_STATUS_INTERNAL = 7,
} CclStatus;

typedef struct CclEncoder CclEncoder;

typedef struct CclEngine CclEngine;

typedef struct CclRover CclRover;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the last error message of this thread into `buf` (NUL-terminated,
 truncated to fit) and returns the full message length, or 0 if there is
 none.

 # Safety
 `buf` must be null or point to `len` writable bytes.
 */
size_t ccl_last_error(char *buf, size_t len);

/*
 Library version as a static NUL-terminated string.
 */
const char *ccl_version(void);

/*
 Shaped CCL reward `min(beta * softplus(-raw), cap)`.
 */
double ccl_shape(double raw, double beta, double cap);

/*
 Dimension of every embedding produced by the encoders.
 */
size_t ccl_embedding_dim(void);

/*
 # Safety
 `out` must be a valid pointer to write the handle to.
 */
enum CclStatus ccl_encoder_new(uint64_t seed, size_t obs_dim, struct CclEncoder **out);

/*
 Embeds one observation of length `obs_len` into `embedding`, which must
 have length `ccl_embedding_dim()`.

 # Safety
 `encoder` must come from `ccl_encoder_new`; buffers must hold the stated
 number of doubles.
 */
enum CclStatus ccl_encoder_encode(const struct CclEncoder *encoder,
                                  const double *obs,
                                  size_t obs_len,
                                  double *embedding,
                                  size_t embedding_len);

/*
 # Safety
 `encoder` must be null or come from `ccl_encoder_new`, and not be used
 afterwards.
 */
void ccl_encoder_free(struct CclEncoder *encoder);

/*
 Creates an intrinsic-reward engine for `n_agents` agents with the given
 observation sizes. `config_json` is a JSON object of intrinsic settings
 (missing keys take defaults) or null for all defaults.

 # Safety
 `obs_dims` must hold `n_agents` values; `config_json` must be null or a
 NUL-terminated string; `out` must be valid for writes.
 */
enum CclStatus ccl_engine_new(const char *config_json,
                              const size_t *obs_dims,
                              size_t n_agents,
                              uint64_t encoder_seed,
                              struct CclEngine **out);

/*
 Starts an episode. `obs` holds every agent's observation back to back.

 # Safety
 `engine` must come from `ccl_engine_new`; `obs` must hold `obs_len`
 doubles.
 */
enum CclStatus ccl_engine_reset(struct CclEngine *engine, const double *obs, size_t obs_len);

/*
 Advances one step and writes one CCL and one OEM reward per agent.
 Terms not enabled by the reward mode are written as 0.

 # Safety
 `engine` must come from `ccl_engine_new`; `ccl` and `oem` must each hold
 `n_agents` doubles.
 */
enum CclStatus ccl_engine_step(struct CclEngine *engine,
                               const double *obs,
                               size_t obs_len,
                               double *ccl,
                               double *oem,
                               size_t n_agents);

/*
 # Safety
 `engine` must be null or come from `ccl_engine_new`, and not be used
 afterwards.
 */
void ccl_engine_free(struct CclEngine *engine);

/*
 Creates a rover environment from a JSON object of rover settings, or
 the defaults when `config_json` is null. `seed` drives spawn positions.

 # Safety
 `config_json` must be null or a NUL-terminated string; `out` must be
 valid for writes.
 */
enum CclStatus ccl_rover_new(const char *config_json, uint64_t seed, struct CclRover **out);

/*
 Number of rovers.

 # Safety
 `env` must be null or come from `ccl_rover_new`.
 */
size_t ccl_rover_n_agents(const struct CclRover *env);

/*
 Observation length of each rover.

 # Safety
 `env` must be null or come from `ccl_rover_new`.
 */
size_t ccl_rover_obs_dim(const struct CclRover *env);

/*
 Action length of each rover.

 # Safety
 `env` must be null or come from `ccl_rover_new`.
 */
size_t ccl_rover_action_dim(const struct CclRover *env);

/*
 Starts an episode and writes the observations, agent-major, into `obs`
 (length `n_agents * obs_dim`).

 # Safety
 `env` must come from `ccl_rover_new`; `obs` must hold `obs_len` doubles.
 */
enum CclStatus ccl_rover_reset(struct CclRover *env, double *obs, size_t obs_len);

/*
 Applies one joint action (agent-major, length `n_agents * action_dim`),
 writes the next observations, the team reward (nonzero only at the end)
 and whether the episode is over.

 # Safety
 `env` must come from `ccl_rover_new`; buffers must hold the stated
 number of values; `team_reward` and `done` must be valid for writes.
 */
enum CclStatus ccl_rover_step(struct CclRover *env,
                              const double *actions,
                              size_t actions_len,
                              double *obs,
                              size_t obs_len,
                              double *team_reward,
                              bool *done);

/*
 Writes rover positions as `x0, y0, x1, y1, ...` (length `2 * n_agents`).

 # Safety
 `env` must come from `ccl_rover_new`; `positions` must hold `len` doubles.
 */
enum CclStatus ccl_rover_positions(const struct CclRover *env, double *positions, size_t len);

/*
 # Safety
 `env` must be null or come from `ccl_rover_new`, and not be used
 afterwards.
 */
void ccl_rover_free(struct CclRover *env);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CCL_H */
