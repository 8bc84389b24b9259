/*
 * aoisched — freshness-aware scheduling for RF-powered devices.
 *
 * C interface of the shared library. All functions return an error code
 * (AOISCHED_OK on success); results come back through out-parameters and
 * opaque handles. Every handle is freed with its matching *_free function.
 * On failure, aoisched_last_error() returns a thread-local message.
 */

#ifndef AOISCHED_H
#define AOISCHED_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* error codes (also the CLI exit codes for 2..4) */
enum {
    AOISCHED_OK = 0,
    AOISCHED_ERR_INVALID_CONFIG = 2,
    AOISCHED_ERR_CAPACITY = 3,
    AOISCHED_ERR_NO_CONVERGENCE = 4,
    AOISCHED_ERR_INVALID_ARGUMENT = 5,
    AOISCHED_ERR_IO = 6,
    AOISCHED_ERR_INTERNAL = 7
};

enum { AOISCHED_OBJECTIVE_AOI = 0, AOISCHED_OBJECTIVE_THROUGHPUT = 1 };
enum { AOISCHED_ALGORITHM_RVI = 0, AOISCHED_ALGORITHM_PIA = 1 };

typedef struct aoisched_config aoisched_config;
typedef struct aoisched_model aoisched_model;
typedef struct aoisched_solution aoisched_solution;
typedef struct aoisched_region aoisched_region;
typedef struct aoisched_trace aoisched_trace;

const char* aoisched_version(void);
/* thread-local message describing the most recent failure in this thread */
const char* aoisched_last_error(void);

/* ---- configuration ---------------------------------------------------- */

int aoisched_config_load_file(const char* path, aoisched_config** out);
int aoisched_config_load_json(const char* json_text, aoisched_config** out);
void aoisched_config_free(aoisched_config* config);

int aoisched_config_device_count(const aoisched_config* config, size_t* out);
int aoisched_config_aoi_cap(const aoisched_config* config, size_t device, int* out);
/* FNV-1a digest of the loaded bytes; buf needs at least 17 chars */
int aoisched_config_hash_hex(const aoisched_config* config, char* buf, size_t buflen);
/* derived-value echo (energy quanta, transmit/harvest tables, state count,
 * warnings) written as JSON; pass NULL to skip the file and only validate */
int aoisched_config_validation_report(const aoisched_config* config,
                                      const char* json_path_or_null);
/* exact state count, even when it exceeds the build cap */
int aoisched_config_state_count(const aoisched_config* config, uint64_t* out);

/* ---- model ------------------------------------------------------------ */

int aoisched_model_build(const aoisched_config* config, aoisched_model** out);
void aoisched_model_free(aoisched_model* model);
int aoisched_model_state_count(const aoisched_model* model, size_t* out);
/* textual transition dump, one line per (state, feasible action) */
int aoisched_model_dump_transitions(const aoisched_model* model, const char* path);

/* ---- solving ---------------------------------------------------------- */

/* weights: NULL uses the per-device weights from the config; tol <= 0 and
 * max_iter <= 0 pick the solver defaults */
int aoisched_solve(const aoisched_model* model, int objective, int algorithm,
                   const double* weights_or_null, size_t weights_len, double tol,
                   long max_iter, aoisched_solution** out);
void aoisched_solution_free(aoisched_solution* solution);

int aoisched_solution_gain(const aoisched_solution* solution, double* out);
int aoisched_solution_iterations(const aoisched_solution* solution, long* out);
int aoisched_solution_residual(const aoisched_solution* solution, double* out);
int aoisched_solution_throughput(const aoisched_solution* solution, double* out);
/* per-device long-run average ages; buf must hold the device count */
int aoisched_solution_avg_aoi(const aoisched_solution* solution, double* buf,
                              size_t buflen);
/* action at a state: 0 = harvest, i >= 1 = transmit device i (1-based) */
int aoisched_solution_action(const aoisched_solution* solution, size_t state_index,
                             int* out);
int aoisched_solution_write_json(const aoisched_solution* solution, const char* path);
int aoisched_solution_write_policy_csv(const aoisched_solution* solution,
                                       const char* path);

/* ---- simulation, slices, diffs ----------------------------------------- */

/* replays the solution's policy; trajectory CSV is optional (large) */
int aoisched_simulate(const aoisched_solution* solution, long horizon, uint64_t seed,
                      const char* trajectory_csv_or_null, const char* summary_json_path);

/* action grid over (battery x channel) at the given age values for one
 * device; fix_* arrays (length = device count, 1-based channel levels and
 * ages) pin the other devices and may be NULL only for single-device models */
int aoisched_policy_slice(const aoisched_solution* solution, size_t device,
                          const int* aoi_values, size_t aoi_values_len,
                          const int* fix_battery_or_null, const int* fix_channel_or_null,
                          const int* fix_aoi_or_null, const char* csv_path);

/* exact action diff of two solutions over the same model */
int aoisched_policy_diff(const aoisched_solution* a, const aoisched_solution* b,
                         const char* diff_csv_or_null, size_t* differences_out);

/* ---- achievable-age region --------------------------------------------- */

int aoisched_region_sweep(const aoisched_config* config, int grid, int refine,
                          int threads, double tol, long max_iter,
                          aoisched_region** out);
void aoisched_region_free(aoisched_region* region);
int aoisched_region_point_count(const aoisched_region* region, size_t* out);
int aoisched_region_write_sweep_csv(const aoisched_region* region, const char* path);
int aoisched_region_write_frontier_csv(const aoisched_region* region, const char* path);
/* the sum-age (S) and refined min-max (F) operating points, same schema */
int aoisched_region_write_points_csv(const aoisched_region* region, const char* path);

/* ---- update-trace metrics ---------------------------------------------- */

int aoisched_trace_load_csv(const char* path, aoisched_trace** out);
void aoisched_trace_free(aoisched_trace* trace);
int aoisched_trace_packet_count(const aoisched_trace* trace, size_t* out);
/* summary ("metric,value") and per-packet ("n,X,T,A,voiu") reports over
 * [t_from, t_to] (use_window = 0 spans the whole trace); penalty_degree picks
 * the age penalty for the cost-of-staleness row: 1 linear, 2 quadratic */
int aoisched_trace_metrics_csv(const aoisched_trace* trace, double initial_age,
                               double t_from, double t_to, int use_window,
                               int penalty_degree, const char* summary_csv_path,
                               const char* per_packet_csv_path);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* AOISCHED_H */
