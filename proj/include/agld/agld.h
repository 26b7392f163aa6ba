/* C interface to the agld sampling library.
 *
 * Every function returns an agld_status. On failure the message of the most
 * recent error on the calling thread is available from agld_last_error().
 * Objects are opaque and released with their matching *_free function.
 * Strings handed out by the library are released with agld_string_free.
 */
#ifndef AGLD_AGLD_H
#define AGLD_AGLD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define AGLD_API __declspec(dllexport)
#else
#define AGLD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum agld_status {
  AGLD_OK = 0,
  AGLD_ERR_INVALID_ARGUMENT = 1,
  AGLD_ERR_OUT_OF_RANGE = 2,
  AGLD_ERR_DIMENSION = 3,
  AGLD_ERR_DIVERGED = 4,
  AGLD_ERR_PARSE = 5,
  AGLD_ERR_IO = 6,
  AGLD_ERR_VERIFICATION = 7,
  AGLD_ERR_INTERNAL = 100
} agld_status;

typedef struct agld_model agld_model;
typedef struct agld_chain agld_chain;

AGLD_API const char* agld_version(void);
AGLD_API const char* agld_last_error(void);
AGLD_API const char* agld_status_name(agld_status status);
AGLD_API void agld_string_free(char* s);

/* ---- models */

AGLD_API agld_status agld_model_quadratic(int64_t n, int64_t dim, uint64_t seed,
                                          double eig_min, double eig_max,
                                          agld_model** out);
AGLD_API agld_status agld_model_gmm(int64_t n, int64_t dim, uint64_t seed, int scale_by_n,
                                    agld_model** out);
/* kind: "ridge" or "logistic". The file is libsvm (optionally gzip) or CSV
 * (.csv / .csv.gz, label column `label_column`). */
AGLD_API agld_status agld_model_glm_file(const char* kind, const char* path,
                                         const char* label_column, double lambda,
                                         agld_model** out);
AGLD_API agld_status agld_model_regularize(const agld_model* base, double lambda_reg,
                                           agld_model** out);
AGLD_API void agld_model_free(agld_model* model);

AGLD_API agld_status agld_model_size(const agld_model* model, int64_t* n, int64_t* dim);
AGLD_API agld_status agld_model_component_grad(const agld_model* model, int64_t i,
                                               const double* x, double* out);
AGLD_API agld_status agld_model_full_grad(const agld_model* model, const double* x,
                                          double* out);
AGLD_API agld_status agld_model_neg_log_density(const agld_model* model, const double* x,
                                                double* out);

/* ---- chains
 * method: "LMC", "SGLD", "SAGA-LD", "SVRG-LD" or "<PPU|PTU|TMU>-<RA|RR|CA>".
 * epoch_length 0 means N. x0 may be NULL (origin). */
AGLD_API agld_status agld_chain_create(const agld_model* model, const char* method,
                                       double eta, int64_t batch, int64_t epoch_length,
                                       uint64_t seed, int64_t chain_index, const double* x0,
                                       agld_chain** out);
AGLD_API agld_status agld_chain_step(agld_chain* chain, int64_t steps);
/* x receives dim values; k and grad_evals may be NULL. */
AGLD_API agld_status agld_chain_state(const agld_chain* chain, double* x, int64_t* k,
                                      int64_t* grad_evals);
AGLD_API void agld_chain_free(agld_chain* chain);

/* ---- metrics (matrices are column-major, dim x dim) */

AGLD_API agld_status agld_gaussian_w2(int64_t dim, const double* mean_a, const double* cov_a,
                                      const double* mean_b, const double* cov_b,
                                      double* out);
/* Clouds are column-major dim x count. */
AGLD_API agld_status agld_sliced_w2(int64_t dim, const double* a, int64_t count_a,
                                    const double* b, int64_t count_b, int64_t n_proj,
                                    uint64_t seed, double* out);
AGLD_API agld_status agld_lyapunov_stationary_cov(int64_t dim, const double* precision,
                                                  double eta, double* out);

/* ---- experiments
 * config_json: an experiment config object. On success *result_json (may be
 * NULL) receives the manifest text. threads 0 = default. */
AGLD_API agld_status agld_experiment_run(const char* config_json, unsigned threads,
                                         char** result_json);
/* Reruns a manifest into out_dir (NULL: "replay" next to the manifest).
 * *match is set to 1 when every file hash agrees. *report (may be NULL)
 * receives a JSON object listing mismatched files. */
AGLD_API agld_status agld_replay_manifest(const char* manifest_path, const char* out_dir,
                                          unsigned threads, int* match, char** report);
/* Fills experiment defaults; *resolved_json receives the resolved config. */
AGLD_API agld_status agld_config_resolve(const char* config_json, char** resolved_json);

#ifdef __cplusplus
}
#endif

#endif /* AGLD_AGLD_H */
