/* C interface to the piic library: Bayesian predictive information criteria
 * (DIC, WAIC, PIIC, sparse PIIC, PIIC2) for regression models with
 * intensified priors, plus the simulation, real-data and causal workflows.
 *
 * All functions are thread-compatible: distinct handles may be used from
 * distinct threads. Error messages are stored per handle (or thread-locally
 * for handle-less calls) and remain valid until the next call on the same
 * handle/thread.
 */
#ifndef PIIC_H
#define PIIC_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  PIIC_OK = 0,
  PIIC_ERR_CONFIG = 2,  /* malformed config, unusable input files */
  PIIC_ERR_NUMERIC = 3  /* numerical failure (non-convergence, singularity, ...) */
} piic_status;

/* library version string, e.g. "0.1.0" */
const char* piic_version(void);

/* message for the most recent failure on this thread (handle-less calls) */
const char* piic_last_error(void);

/* ---- run handle: executes a full JSON-configured run --------------------
 *
 * The config document selects the subcommand and its payload:
 *   {"subcommand": "analyze" | "simulate" | "causal_sim" | "diabetes",
 *    "seed": 1234,
 *    "<subcommand>": { ... }}
 * Execution writes report.json, table.csv and manifest.json under out_dir.
 */
typedef struct piic_run piic_run;

piic_status piic_run_create(const char* config_json, piic_run** out);
piic_status piic_run_execute(piic_run* run, const char* out_dir);
/* one-line human-readable summary; NULL before a successful execute */
const char* piic_run_summary(const piic_run* run);
/* message of the last error on this handle; NULL if none */
const char* piic_run_error(const piic_run* run);
void piic_run_destroy(piic_run* run);

/* ---- direct analysis of in-memory data ----------------------------------
 *
 * x is row-major n x p; y has length n. options_json carries the analyze
 * payload (model, prior, criteria, sampler, search, seed); the data section
 * is not used. On success *report_json receives a malloc'd JSON document
 * with one report per criterion; free it with piic_string_free.
 */
typedef struct piic_dataset piic_dataset;

piic_status piic_dataset_create(const double* y, const double* x_row_major, int n, int p, piic_dataset** out);
void piic_dataset_destroy(piic_dataset* data);

piic_status piic_analyze_dataset(const piic_dataset* data, const char* options_json, char** report_json);

void piic_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* PIIC_H */
