/* C interface to the peertreat library.
 *
 * Every function returns a pt_status. On failure the message of the most
 * recent error on the calling thread is available from pt_last_error().
 * Handles are opaque and owned by the caller; release them with the matching
 * *_free function (passing NULL is a no-op). */
#ifndef PEERTREAT_H
#define PEERTREAT_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define PT_API __attribute__((visibility("default")))
#else
#define PT_API
#endif

typedef enum pt_status {
  PT_OK = 0,
  PT_ERR_INTERNAL = 1,
  PT_ERR_VALIDATION = 2,
  PT_ERR_CONVERGENCE = 3, /* also numerical degeneracy */
  PT_ERR_IO = 4
} pt_status;

typedef struct pt_config pt_config;
typedef struct pt_dataset pt_dataset;
typedef struct pt_estimate pt_estimate;
typedef struct pt_effects pt_effects;
typedef struct pt_counterfactual pt_counterfactual;
typedef struct pt_mc_study pt_mc_study;

/* Describes one CLI-style run; recorded in manifest.json next to the outputs. */
typedef struct pt_run_info {
  const char* subcommand;
  uint64_t seed;
  int seed_generated;
  const char* const* inputs;
  size_t input_count;
} pt_run_info;

PT_API const char* pt_version(void);
PT_API const char* pt_last_error(void);

/* Configuration: "key = value" lines. */
PT_API pt_status pt_config_new(pt_config** out);
PT_API pt_status pt_config_load(const char* path, pt_config** out);
PT_API pt_status pt_config_set(pt_config* cfg, const char* key, const char* value);
/* Copies the value of `key` (NUL-terminated) into buf; *found is 0 when unset. */
PT_API pt_status pt_config_get(const pt_config* cfg, const char* key, char* buf, size_t cap, int* found);
PT_API void pt_config_free(pt_config* cfg);

/* Datasets. `thresholds` holds --quantile-threshold specs ("0.5", "y=0.5"). */
PT_API pt_status pt_dataset_load(const char* nodes_csv, const char* edges_csv, const char* const* thresholds,
                                 size_t threshold_count, pt_dataset** out);
PT_API pt_status pt_dataset_save(const pt_dataset* ds, const char* nodes_csv, const char* edges_csv);
/* Writes nodes.csv, edges.csv and manifest.json into dir. */
PT_API pt_status pt_dataset_write(const pt_dataset* ds, const char* dir, const pt_config* cfg,
                                  const pt_run_info* run);
PT_API pt_status pt_dataset_size(const pt_dataset* ds, size_t* n, size_t* k_T, size_t* k_O);
PT_API void pt_dataset_free(pt_dataset* ds);

/* Draws a dataset from the reference design (keys n, max_degree and the true
 * parameter keys). */
PT_API pt_status pt_simulate(const pt_config* cfg, uint64_t seed, pt_dataset** out);

/* Estimation. `seed` drives the parametric bootstrap only. */
PT_API pt_status pt_estimate_run(const pt_dataset* ds, const pt_config* cfg, uint64_t seed, pt_estimate** out);
/* Loads theta.json and solves the equilibrium at it. */
PT_API pt_status pt_estimate_from_file(const pt_dataset* ds, const char* theta_json, const pt_config* cfg,
                                       pt_estimate** out);
PT_API pt_status pt_estimate_converged(const pt_estimate* est, int* converged);
/* Copies the packed parameter vector; *len receives its length. */
PT_API pt_status pt_estimate_theta(const pt_estimate* est, double* buf, size_t cap, size_t* len);
PT_API pt_status pt_estimate_std_errors(const pt_estimate* est, double* buf, size_t cap, size_t* len);
PT_API pt_status pt_estimate_write(const pt_estimate* est, const pt_dataset* ds, const char* dir,
                                   const pt_config* cfg, const pt_run_info* run);
PT_API void pt_estimate_free(pt_estimate* est);

/* PTE/APTE, plus CTE per individual when the config sets cte = true. */
PT_API pt_status pt_effects_run(const pt_dataset* ds, const pt_estimate* est, const pt_config* cfg, uint64_t seed,
                                pt_effects** out);
PT_API pt_status pt_effects_apte(const pt_effects* fx, double* apte);
PT_API pt_status pt_effects_write(const pt_effects* fx, const pt_dataset* ds, const char* dir, const pt_config* cfg,
                                  const pt_run_info* run);
PT_API void pt_effects_free(pt_effects* fx);

PT_API pt_status pt_counterfactual_run(const pt_dataset* ds, const pt_estimate* est, const pt_config* cfg,
                                       uint64_t seed, pt_counterfactual** out);
PT_API pt_status pt_counterfactual_composite_ratio(const pt_counterfactual* cf, double* ratio);
PT_API pt_status pt_counterfactual_write(const pt_counterfactual* cf, const pt_dataset* ds, const char* dir,
                                         const pt_config* cfg, const pt_run_info* run);
PT_API void pt_counterfactual_free(pt_counterfactual* cf);

PT_API pt_status pt_mc_study_run(const pt_config* cfg, uint64_t seed, pt_mc_study** out);
PT_API pt_status pt_mc_study_write(const pt_mc_study* mc, const char* dir, const pt_config* cfg,
                                   const pt_run_info* run);
PT_API void pt_mc_study_free(pt_mc_study* mc);

#ifdef __cplusplus
}
#endif

#endif
