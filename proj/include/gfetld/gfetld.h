#ifndef GFETLD_H
#define GFETLD_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gfetld_status {
    GFETLD_OK = 0,
    GFETLD_ERR_INVALID_ARGUMENT = 1,
    GFETLD_ERR_DEGENERATE_DATA = 2,
    GFETLD_ERR_SINGULAR_MATRIX = 3,
    GFETLD_ERR_CAPABILITY = 4,
    GFETLD_ERR_DIVERGENCE = 5,
    GFETLD_ERR_CONFIG = 6,
    GFETLD_ERR_IO = 7,
    GFETLD_ERR_INTERNAL = 8
} gfetld_status;

/* Message for the most recent failure on the calling thread ("" after a
 * success). The pointer stays valid until the next call on the thread. */
const char* gfetld_last_error(void);

/* Two-sample MMD^2 estimators over row-major (rows x dim) buffers with a
 * Gaussian kernel. bandwidth <= 0 requests the median heuristic on the
 * pooled samples. */
gfetld_status gfetld_mmd2_unbiased(const double* x, size_t x_rows,
                                   const double* y, size_t y_rows, size_t dim,
                                   double bandwidth, double* out);
gfetld_status gfetld_mmd2_vstat(const double* x, size_t x_rows,
                                const double* y, size_t y_rows, size_t dim,
                                double bandwidth, double* out);

/* Median pairwise distance of the rows of x. */
gfetld_status gfetld_median_bandwidth(const double* x, size_t rows, size_t dim,
                                      double* out);

/* Fixed-step gradient descent on the U-statistic MMD^2 with frozen latent
 * draws. model_name is one of gaussian_location / uniform_location (models
 * exposing an exact gradient); theta holds the start point and receives the
 * estimate; bandwidth <= 0 uses the median heuristic on the data; objective
 * (nullable) receives the final MMD^2. */
gfetld_status gfetld_minimum_mmd_estimate(const char* model_name,
                                          const double* data, size_t data_rows,
                                          size_t dim, double* theta,
                                          size_t theta_dim, double bandwidth,
                                          int sims, int iters, double step_size,
                                          uint64_t seed, double* objective);

/* Experiment driver. Configure with key=value entries and/or a flat config
 * file, then run. run() writes the output files into output_dir (falling
 * back to the config's output_dir when NULL/empty) and returns
 * GFETLD_ERR_DIVERGENCE when every repetition failed; the outputs are still
 * written in that case. */
typedef struct gfetld_experiment gfetld_experiment;

gfetld_experiment* gfetld_experiment_create(void);
void gfetld_experiment_destroy(gfetld_experiment* exp);
gfetld_status gfetld_experiment_set(gfetld_experiment* exp, const char* kv);
gfetld_status gfetld_experiment_load_file(gfetld_experiment* exp,
                                          const char* path);
gfetld_status gfetld_experiment_run(gfetld_experiment* exp,
                                    const char* output_dir);

/* JSON report of the last completed run; NULL before the first run. Valid
 * until the next run or destroy. */
const char* gfetld_experiment_report_json(const gfetld_experiment* exp);

#ifdef __cplusplus
}
#endif

#endif /* GFETLD_H */
