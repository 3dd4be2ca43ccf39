/* C interface to the traffic simulator. All functions are safe to call from
 * any thread on distinct handles; dtm_last_error() is per thread. */
#ifndef DTM_DTM_H
#define DTM_DTM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(DTM_BUILDING_LIBRARY)
#define DTM_API __declspec(dllexport)
#else
#define DTM_API __declspec(dllimport)
#endif
#else
#define DTM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dtm_status {
  DTM_OK = 0,
  DTM_ERR_CONFIG = 1,   /* invalid configuration or input file */
  DTM_ERR_RUNTIME = 2,  /* simulation or I/O failure */
  DTM_GRIDLOCK = 3,     /* at least one run hit the tick limit; results were still produced */
  DTM_ERR_ARGUMENT = 4  /* null handle or malformed argument */
} dtm_status;

typedef struct dtm_network dtm_network;
typedef struct dtm_scenario dtm_scenario;
typedef struct dtm_report dtm_report;

DTM_API const char* dtm_version(void);
/* Message of the last failed call on this thread ("" if none). */
DTM_API const char* dtm_last_error(void);

DTM_API dtm_status dtm_network_grid(uint32_t rows, uint32_t cols, double block_m, dtm_network** out);
DTM_API dtm_status dtm_network_load(const char* path, dtm_network** out);
DTM_API dtm_status dtm_network_save(const dtm_network* net, const char* path);
DTM_API dtm_status dtm_network_size(const dtm_network* net, size_t* intersections, size_t* edges);
DTM_API void dtm_network_free(dtm_network* net);

DTM_API dtm_status dtm_scenario_load(const char* path, dtm_scenario** out);
DTM_API dtm_status dtm_scenario_parse(const char* json_text, dtm_scenario** out);
/* Overrides one setting. Keys: seed, runs, strategy, max_ticks, outputs.edges,
 * outputs.decisions, outputs.control, lane_reversal.enabled, dlg.enabled, and
 * every sweep parameter name. */
DTM_API dtm_status dtm_scenario_set(dtm_scenario* scenario, const char* key, const char* value);
DTM_API void dtm_scenario_free(dtm_scenario* scenario);

/* Runs every replication and writes CSV output into out_dir (created if
 * missing). out may be NULL. */
DTM_API dtm_status dtm_simulate(const dtm_scenario* scenario, const char* out_dir, dtm_report** out);
/* strategies: comma-separated list such as "vam,centralized,alert,none". */
DTM_API dtm_status dtm_compare(const dtm_scenario* scenario, const char* strategies, const char* out_dir,
                               dtm_report** out);
/* values: comma-separated numbers. */
DTM_API dtm_status dtm_sweep(const dtm_scenario* scenario, const char* param, const char* values,
                             const char* out_dir, dtm_report** out);

/* Human-readable table of the results. Valid until the report is freed. */
DTM_API const char* dtm_report_text(const dtm_report* report);
/* Number of result rows (runs, strategies or sweep points). */
DTM_API size_t dtm_report_rows(const dtm_report* report);
DTM_API int dtm_report_truncated(const dtm_report* report);
DTM_API void dtm_report_free(dtm_report* report);

#ifdef __cplusplus
}
#endif

#endif
