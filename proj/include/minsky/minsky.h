#ifndef MINSKY_MINSKY_H
#define MINSKY_MINSKY_H

/* C interface to the Minsky instability engine.
 *
 * Every call returns a status code (0 on success). On failure the message is
 * available from minsky_last_error() on the same thread until the next call.
 * Strings handed out through char** parameters are owned by the caller and
 * must be released with minsky_string_free(). Requests and reports are JSON. */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(MINSKY_BUILDING)
#define MINSKY_API __attribute__((visibility("default")))
#else
#define MINSKY_API
#endif

/* Status codes double as CLI exit codes. */
typedef enum {
  MINSKY_OK = 0,
  MINSKY_ERR_INTERNAL = 1,
  MINSKY_ERR_CONFIG = 2,
  MINSKY_ERR_NUMERICAL = 3,
  MINSKY_ERR_IO = 4,
  MINSKY_ERR_NOT_FOUND = 5
} minsky_status;

typedef struct minsky_sim minsky_sim;
typedef struct minsky_server minsky_server;

MINSKY_API const char* minsky_version(void);
MINSKY_API const char* minsky_last_error(void);
MINSKY_API void minsky_string_free(char* s);

/* Fixed points, thresholds and stability for a flat parameter object
 * {i0, k, alpha, beta, mu?, gamma?, S?, rho_C?, n_total?, returns?}.
 * n0 > 0 adds trajectories; pass 0 to skip. */
MINSKY_API int minsky_fixed_points(const char* params_json, double n0, int max_steps, char** report_json);

/* Phase diagram: CSV grid plus a JSON sidecar with thresholds and boundaries. */
MINSKY_API int minsky_phase_sweep(const char* request_json, char** grid_csv, char** sidecar_json);

/* Percolation scaling fit. The request's own seed is replaced by `seed`. */
MINSKY_API int minsky_scaling_sweep(const char* request_json, const char* base_dir, uint64_t seed,
                                    char** points_csv, char** fit_json);

/* Batch run of a scenario to its configured tick count. */
MINSKY_API int minsky_simulate(const char* scenario_json, const char* base_dir, char** series_csv,
                               char** summary_json);

/* Ensemble of runs; n_runs <= 0 uses the scenario's ensemble block. */
MINSKY_API int minsky_ensemble(const char* scenario_json, const char* base_dir, int n_runs,
                               char** stats_csv, char** runs_csv, char** summary_json);

/* Stepwise simulation handle. */
MINSKY_API int minsky_sim_create(const char* scenario_json, const char* base_dir, minsky_sim** out);
MINSKY_API int minsky_sim_tick(minsky_sim* sim, int64_t n_ticks, char** deltas_json);
MINSKY_API int minsky_sim_intervene(minsky_sim* sim, const char* intervention_json, char** ack_json);
MINSKY_API int minsky_sim_preview(minsky_sim* sim, const char* intervention_json, char** preview_json);
MINSKY_API int minsky_sim_snapshot(minsky_sim* sim, int include_firms, char** snapshot_json);
MINSKY_API void minsky_sim_free(minsky_sim* sim);

/* HTTP session service. Port 0 picks a free port, reported through bound_port. */
MINSKY_API int minsky_server_create(minsky_server** out);
MINSKY_API int minsky_server_listen(minsky_server* server, const char* bind, int port, int* bound_port);
/* Blocks the calling thread until minsky_server_stop() is called elsewhere. */
MINSKY_API int minsky_server_run(minsky_server* server, const char* bind, int port);
MINSKY_API int minsky_server_stop(minsky_server* server);
MINSKY_API void minsky_server_free(minsky_server* server);

#ifdef __cplusplus
}
#endif

#endif
