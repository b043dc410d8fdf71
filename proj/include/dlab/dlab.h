/* C interface to the diffusion score laboratory.
 *
 * All objects are opaque handles released with their *_free function.
 * Every fallible call returns a dl_status; on failure dl_last_error() gives
 * a message for the calling thread. Vectors are caller-owned double arrays;
 * matrices are row-major. Strings returned through char** are released with
 * dl_string_free. */
#ifndef DLAB_DLAB_H
#define DLAB_DLAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(DLAB_BUILDING_LIBRARY)
#define DL_API __attribute__((visibility("default")))
#else
#define DL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dl_status {
  DL_OK = 0,
  DL_ERR_INVALID_ARGUMENT = 1,
  DL_ERR_DIMENSION_TOO_LARGE = 2,
  DL_ERR_NONPOSITIVE_TIME = 3,
  DL_ERR_SHAPE_MISMATCH = 4,
  DL_ERR_CONTRACTION_VIOLATION = 5,
  DL_ERR_NON_CONVERGENCE = 6,
  DL_ERR_NON_FINITE = 7,
  DL_ERR_DIVERGENCE = 8,
  DL_ERR_SUPPORT_TOO_LARGE = 9,
  DL_ERR_EMPTY_INPUT = 10,
  DL_ERR_IO = 11,
  DL_ERR_PARSE = 12,
  DL_ERR_BOUNDARY_ARGUMENT = 13,
  DL_ERR_INTERNAL = 99
} dl_status;

typedef struct dl_model dl_model;
typedef struct dl_grid dl_grid;
typedef struct dl_weights dl_weights;
typedef struct dl_score dl_score;

DL_API const char* dl_version(void);
/* Machine-parsable error class, e.g. "dimension-too-large". */
DL_API const char* dl_status_string(dl_status status);
DL_API const char* dl_last_error(void);
DL_API void dl_string_free(char* s);

/* ---- models ---- */
DL_API dl_status dl_model_from_json(const char* json, dl_model** out);
DL_API dl_status dl_model_load(const char* path, dl_model** out);
DL_API dl_status dl_model_save(const dl_model* model, const char* path);
DL_API dl_status dl_model_to_json(const dl_model* model, char** out);
DL_API dl_status dl_model_ising(const double* coupling, int dim, dl_model** out);
/* Zero-diagonal symmetric Gaussian coupling scaled to the operator norm. */
DL_API dl_status dl_model_ising_random(int dim, double op_norm, uint64_t seed,
                                       dl_model** out);
DL_API dl_status dl_model_ising_sk(int dim, double beta, uint64_t seed,
                                   dl_model** out);
/* Random joint coupling over d+m spins split into blocks. */
DL_API dl_status dl_model_block_random(int d, int m, double op_norm,
                                       uint64_t seed, dl_model** out);
DL_API dl_status dl_model_sparse(const double* dictionary, int d, int m,
                                 const double* atoms, const double* probs,
                                 int n_atoms, double tau, dl_model** out);
/* Gaussian dictionary with N(0, 1/d) entries. */
DL_API dl_status dl_model_sparse_random(int d, int m, const double* atoms,
                                        const double* probs, int n_atoms,
                                        double tau, uint64_t seed,
                                        dl_model** out);
DL_API void dl_model_free(dl_model* model);
DL_API int dl_model_dim(const dl_model* model);
/* m for block and sparse models, 0 for Ising. */
DL_API int dl_model_latent_dim(const dl_model* model);
/* "ising", "block_ising" or "sparse_coding". */
DL_API const char* dl_model_type(const dl_model* model);
/* 16 hex digits identifying the serialized model. */
DL_API dl_status dl_model_hash(const dl_model* model, char** out);
/* Writes n*d values; theta_out (n*m, block models) may be NULL. */
DL_API dl_status dl_model_sample(const dl_model* model, size_t n, uint64_t seed,
                                 double* out, double* theta_out);

/* ---- time grids ---- */
DL_API dl_status dl_grid_two_phase(double kappa, int n0, int n, dl_grid** out);
DL_API dl_status dl_grid_uniform(double horizon, double delta, int n,
                                 dl_grid** out);
DL_API dl_status dl_grid_from_json(const char* json, dl_grid** out);
DL_API dl_status dl_grid_load(const char* path, dl_grid** out);
DL_API void dl_grid_free(dl_grid* grid);
DL_API int dl_grid_steps(const dl_grid* grid);
DL_API double dl_grid_horizon(const dl_grid* grid);
DL_API double dl_grid_delta(const dl_grid* grid);
DL_API dl_status dl_grid_times(const dl_grid* grid, double* out); /* n+1 */
DL_API dl_status dl_grid_gaps(const dl_grid* grid, double* out);  /* n */
DL_API dl_status dl_grid_to_json(const dl_grid* grid, char** out);

/* ---- networks ---- */
typedef struct dl_net_info {
  char kind[16];
  int d, m, theta_dim, D, L, M;
  double bound, t, zeta;
} dl_net_info;

typedef struct dl_unroll_config {
  int L;
  double zeta;      /* PWL budget */
  int sk;           /* 1: K = beta^2 (1 - q_t) I */
  double beta;
  int conditional;  /* block models: conditional net (else marginal) */
} dl_unroll_config;

DL_API void dl_unroll_config_default(dl_unroll_config* cfg);
DL_API dl_status dl_weights_load(const char* path, dl_weights** out);
DL_API dl_status dl_weights_from_json(const char* json, dl_weights** out);
DL_API dl_status dl_weights_to_json(const dl_weights* w, char** out);
DL_API dl_status dl_weights_save(const dl_weights* w, const char* path);
DL_API void dl_weights_free(dl_weights* w);
DL_API size_t dl_weights_count(const dl_weights* w);
DL_API dl_status dl_weights_info(const dl_weights* w, size_t index,
                                 dl_net_info* out);
DL_API dl_status dl_weights_norm(const dl_weights* w, size_t index, double* out);
DL_API dl_status dl_weights_forward(const dl_weights* w, size_t index,
                                    const double* z, const double* theta,
                                    double* out);
DL_API dl_status dl_unroll(const dl_model* model, const dl_unroll_config* cfg,
                           double t, dl_weights** out);
/* One network per query time T - t_k of the grid. */
DL_API dl_status dl_unroll_grid(const dl_model* model,
                                const dl_unroll_config* cfg,
                                const dl_grid* grid, dl_weights** out);

/* ---- training ---- */
typedef struct dl_train_config {
  int D, L, M;  /* D = 0: the unrolled width for the model */
  double learning_rate;
  int steps;
  size_t batch_size;  /* 0: full batch */
  double bound;
  int truncation;
  uint64_t seed;
  double init_scale;
  size_t n_samples;
  uint64_t data_seed;
  int conditional;
} dl_train_config;

DL_API void dl_train_config_default(dl_train_config* cfg);
/* loss_trace (steps+1 values) may be NULL. */
DL_API dl_status dl_train(const dl_model* model, double t,
                          const dl_train_config* cfg, dl_weights** out,
                          double* loss_trace);

/* ---- score oracles ---- */
typedef struct dl_vi_config {
  int sk;
  double beta;
  double zeta;  /* > 0: PWL iteration */
  int steps;    /* >= 0: fixed number of steps */
  double tol;
  int conditional;
} dl_vi_config;

DL_API void dl_vi_config_default(dl_vi_config* cfg);
DL_API dl_status dl_score_exact(const dl_model* model, int conditional,
                                dl_score** out);
DL_API dl_status dl_score_vi(const dl_model* model, const dl_vi_config* cfg,
                             dl_score** out);
/* model may be NULL when truncate is 0. trained selects the provenance tag. */
DL_API dl_status dl_score_network(const dl_weights* w, const dl_model* model,
                                  int truncate, int trained, dl_score** out);
DL_API void dl_score_free(dl_score* score);
DL_API int dl_score_dim(const dl_score* score);
DL_API int dl_score_theta_dim(const dl_score* score);
DL_API const char* dl_score_provenance(const dl_score* score);
DL_API dl_status dl_score_eval(const dl_score* score, double t, const double* z,
                               const double* theta, double* out);

/* ---- sampling ---- */
/* Writes n_chains*d values; theta may be NULL for unconditional scores. */
DL_API dl_status dl_sample(const dl_score* score, const dl_grid* grid,
                           size_t n_chains, uint64_t seed, const double* theta,
                           int threads, double* out);

/* ---- metrics ---- */
DL_API dl_status dl_eval_score_mse(const dl_score* candidate,
                                   const dl_score* reference,
                                   const dl_model* model, double t, size_t n_mc,
                                   uint64_t seed, double* mean,
                                   double* std_error);
/* Rounded-sample KL and TV against sign(λx + σg) at time t (t <= 0: against
 * the model itself). Ising and block (x-marginal) models only. */
DL_API dl_status dl_eval_rounded(const dl_model* model, double t,
                                 const double* samples, size_t n,
                                 double pseudo_count, double* kl, double* tv);
/* JSON report: moments always; KL/TV for spin models; energy distance
 * against noised model draws for sparse coding. */
DL_API dl_status dl_eval_samples(const dl_model* model, double t,
                                 const double* samples, size_t n,
                                 uint64_t seed, char** report_json);

#ifdef __cplusplus
}
#endif

#endif /* DLAB_DLAB_H */
