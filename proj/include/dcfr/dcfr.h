/* C interface to the dynamic causal functional regression library. */
#ifndef DCFR_H
#define DCFR_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DCFR_API __declspec(dllexport)
#else
#define DCFR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dcfr_status {
    DCFR_OK = 0,
    DCFR_ERR_INTERNAL = 1,
    DCFR_ERR_IO = 2,
    DCFR_ERR_CONTRACT = 3,
    DCFR_ERR_SINGULAR = 4,
    DCFR_ERR_SELECTION = 5
} dcfr_status;

typedef struct dcfr_sample dcfr_sample;
typedef struct dcfr_config dcfr_config;
typedef struct dcfr_fit dcfr_fit;
typedef struct dcfr_variance dcfr_variance;
typedef struct dcfr_mc_report dcfr_mc_report;

/* Message of the last failing call on this thread ("" if none). */
DCFR_API const char* dcfr_last_error(void);
DCFR_API const char* dcfr_version(void);
DCFR_API void dcfr_string_free(char* s);

/* Curve samples: n curves on a shared grid of m points; values row-major n x m. */
DCFR_API dcfr_status dcfr_sample_create(const double* t, size_t m, const double* values, size_t n, dcfr_sample** out);
DCFR_API dcfr_status dcfr_sample_load_csv(const char* path, dcfr_sample** out);
DCFR_API dcfr_status dcfr_sample_save_csv(const dcfr_sample* s, const char* path);
DCFR_API size_t dcfr_sample_count(const dcfr_sample* s);
DCFR_API size_t dcfr_sample_points(const dcfr_sample* s);
DCFR_API dcfr_status dcfr_sample_grid(const dcfr_sample* s, double* out);
DCFR_API dcfr_status dcfr_sample_values(const dcfr_sample* s, size_t i, double* out);
DCFR_API void dcfr_sample_free(dcfr_sample* s);

/* Fit configuration. Warp knots include both endpoints; two knots select the classical estimator. */
DCFR_API dcfr_status dcfr_config_create(dcfr_config** out);
DCFR_API dcfr_status dcfr_config_from_json(const char* json, dcfr_config** out);
DCFR_API dcfr_status dcfr_config_to_json(const dcfr_config* c, char** out);
DCFR_API dcfr_status dcfr_config_set_lambda_grid(dcfr_config* c, const double* lambdas, size_t count);
DCFR_API dcfr_status dcfr_config_set_warp_knots(dcfr_config* c, const double* knots, size_t count);
DCFR_API dcfr_status dcfr_config_set_basis(dcfr_config* c, int order, size_t interior_count);
DCFR_API dcfr_status dcfr_config_set_basis_knots(dcfr_config* c, const double* interior, size_t count);
DCFR_API dcfr_status dcfr_config_set_iterations(dcfr_config* c, int max_outer, double rel_tol);
DCFR_API dcfr_status dcfr_config_set_seed(dcfr_config* c, uint64_t seed);
DCFR_API dcfr_status dcfr_config_set_threads(dcfr_config* c, unsigned threads);
DCFR_API void dcfr_config_free(dcfr_config* c);

/* Fitting. dcfr_fit_select picks lambda by AICC over the configured grid. */
DCFR_API dcfr_status dcfr_fit_select(const dcfr_sample* x, const dcfr_sample* y, const dcfr_config* c, dcfr_fit** out);
DCFR_API dcfr_status dcfr_fit_at(const dcfr_sample* x, const dcfr_sample* y, const dcfr_config* c, double lambda, dcfr_fit** out);
DCFR_API dcfr_status dcfr_fit_load(const char* path, dcfr_fit** out);
DCFR_API dcfr_status dcfr_fit_save(const dcfr_fit* f, const char* path);
DCFR_API double dcfr_fit_lambda(const dcfr_fit* f);
DCFR_API double dcfr_fit_df(const dcfr_fit* f);
DCFR_API double dcfr_fit_mse(const dcfr_fit* f);
DCFR_API double dcfr_fit_aicc(const dcfr_fit* f);
DCFR_API int dcfr_fit_boundary(const dcfr_fit* f);
DCFR_API int dcfr_fit_converged(const dcfr_fit* f);
DCFR_API size_t dcfr_fit_coef_count(const dcfr_fit* f);
DCFR_API dcfr_status dcfr_fit_coefficients(const dcfr_fit* f, double* out);
DCFR_API dcfr_status dcfr_fit_beta(const dcfr_fit* f, double s, double t, double* out);
/* Writes beta_surface.csv, warps.csv, aligned_x.csv, aligned_y.csv and lambda_path.csv into dir. */
DCFR_API dcfr_status dcfr_fit_export(const dcfr_fit* f, const dcfr_sample* x, const dcfr_sample* y, const char* dir);
DCFR_API void dcfr_fit_free(dcfr_fit* f);

/* Prediction of responses for new covariates (one output curve per input curve). */
DCFR_API dcfr_status dcfr_predict(const dcfr_fit* f, const dcfr_sample* x_new, dcfr_sample** y_hat);
DCFR_API dcfr_status dcfr_mspe(const dcfr_fit* f, const dcfr_sample* x, const dcfr_sample* y, double* out);

/* Variance of the slope surface. */
DCFR_API dcfr_status dcfr_variance_asymptotic(const dcfr_fit* f, const dcfr_sample* x, const dcfr_sample* y, dcfr_variance** out);
DCFR_API dcfr_status dcfr_variance_bootstrap(const dcfr_fit* f, const dcfr_sample* x, const dcfr_sample* y, size_t replicates,
                                             uint64_t seed, unsigned threads, dcfr_variance** out);
DCFR_API dcfr_status dcfr_variance_eval(const dcfr_variance* v, double s, double t, double* out);
/* Writes variance.csv and beta_filtered.csv on a res x res grid. */
DCFR_API dcfr_status dcfr_variance_export(const dcfr_fit* f, const dcfr_variance* v, size_t res, const char* dir);
DCFR_API void dcfr_variance_free(dcfr_variance* v);

/* Correlations of knot-value differences; pairs holds count (lo, hi) index pairs. Result is JSON. */
DCFR_API dcfr_status dcfr_landmark_stats(const dcfr_fit* f, const size_t* pairs, size_t count, size_t replicates, uint64_t seed,
                                         char** out_json);

/* Simulation models 1 and 2. */
typedef struct dcfr_sim_spec {
    int model;
    size_t n;
    size_t k;
    size_t grid_points;
    size_t n_test;
    size_t replications;
    uint64_t seed;
    unsigned threads;
    int warm_start; /* nonzero: each lambda fit starts from the previous one's warps */
} dcfr_sim_spec;

DCFR_API void dcfr_sim_spec_default(dcfr_sim_spec* spec);
/* Writes x_train.csv, y_train.csv, x_test.csv, y_test.csv into dir. */
DCFR_API dcfr_status dcfr_simulate_dataset(const dcfr_sim_spec* spec, size_t replicate, const char* dir);
DCFR_API dcfr_status dcfr_monte_carlo(const dcfr_sim_spec* spec, dcfr_mc_report** out);
DCFR_API dcfr_status dcfr_mc_report_csv(const dcfr_mc_report* r, char** out);
DCFR_API dcfr_status dcfr_mc_report_json(const dcfr_mc_report* r, char** out);
DCFR_API void dcfr_mc_report_free(dcfr_mc_report* r);

#ifdef __cplusplus
}
#endif

#endif
