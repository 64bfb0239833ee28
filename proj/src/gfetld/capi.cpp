#include "gfetld/gfetld.h"

#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gfetld/errors.hpp"
#include "gfetld/experiments.hpp"
#include "gfetld/kernel.hpp"
#include "gfetld/models.hpp"
#include "gfetld/sampler.hpp"

namespace {

thread_local std::string g_last_error;

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>;

Eigen::MatrixXd copy_matrix(const double* p, size_t rows, size_t dim) {
    if (p == nullptr && rows > 0)
        throw std::invalid_argument("null buffer with nonzero row count");
    return RowMajorMap(p, static_cast<Eigen::Index>(rows),
                       static_cast<Eigen::Index>(dim));
}

// Runs f(), translating exceptions into status codes + thread-local message.
template <typename F>
gfetld_status guarded(F&& f) {
    try {
        f();
        g_last_error.clear();
        return GFETLD_OK;
    } catch (const gfetld::ConfigError& e) {
        g_last_error = e.what();
        return GFETLD_ERR_CONFIG;
    } catch (const gfetld::DegenerateDataError& e) {
        g_last_error = e.what();
        return GFETLD_ERR_DEGENERATE_DATA;
    } catch (const gfetld::SingularMatrixError& e) {
        g_last_error = e.what();
        return GFETLD_ERR_SINGULAR_MATRIX;
    } catch (const gfetld::CapabilityError& e) {
        g_last_error = e.what();
        return GFETLD_ERR_CAPABILITY;
    } catch (const gfetld::DivergenceError& e) {
        g_last_error = e.what();
        return GFETLD_ERR_DIVERGENCE;
    } catch (const gfetld::IoError& e) {
        g_last_error = e.what();
        return GFETLD_ERR_IO;
    } catch (const std::invalid_argument& e) {
        g_last_error = e.what();
        return GFETLD_ERR_INVALID_ARGUMENT;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return GFETLD_ERR_INTERNAL;
    }
}

gfetld::KernelSpec kernel_for(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                              double bandwidth) {
    if (bandwidth > 0.0) return gfetld::make_kernel(bandwidth);
    Eigen::MatrixXd pooled(x.rows() + y.rows(), x.cols());
    pooled << x, y;
    return gfetld::median_heuristic_bandwidth(pooled);
}

}  // namespace

extern "C" {

const char* gfetld_last_error(void) { return g_last_error.c_str(); }

gfetld_status gfetld_mmd2_unbiased(const double* x, size_t x_rows,
                                   const double* y, size_t y_rows, size_t dim,
                                   double bandwidth, double* out) {
    return guarded([&] {
        if (out == nullptr) throw std::invalid_argument("null output pointer");
        const Eigen::MatrixXd xm = copy_matrix(x, x_rows, dim);
        const Eigen::MatrixXd ym = copy_matrix(y, y_rows, dim);
        *out = gfetld::mmd2_unbiased(xm, ym, kernel_for(xm, ym, bandwidth));
    });
}

gfetld_status gfetld_mmd2_vstat(const double* x, size_t x_rows, const double* y,
                                size_t y_rows, size_t dim, double bandwidth,
                                double* out) {
    return guarded([&] {
        if (out == nullptr) throw std::invalid_argument("null output pointer");
        const Eigen::MatrixXd xm = copy_matrix(x, x_rows, dim);
        const Eigen::MatrixXd ym = copy_matrix(y, y_rows, dim);
        *out = gfetld::mmd2_vstat(xm, ym, kernel_for(xm, ym, bandwidth));
    });
}

gfetld_status gfetld_median_bandwidth(const double* x, size_t rows, size_t dim,
                                      double* out) {
    return guarded([&] {
        if (out == nullptr) throw std::invalid_argument("null output pointer");
        *out = gfetld::median_heuristic_bandwidth(copy_matrix(x, rows, dim))
                   .bandwidth;
    });
}

gfetld_status gfetld_minimum_mmd_estimate(const char* model_name,
                                          const double* data, size_t data_rows,
                                          size_t dim, double* theta,
                                          size_t theta_dim, double bandwidth,
                                          int sims, int iters, double step_size,
                                          uint64_t seed, double* objective) {
    return guarded([&] {
        if (model_name == nullptr)
            throw std::invalid_argument("null model name");
        if (theta == nullptr) throw std::invalid_argument("null theta buffer");
        const auto model = gfetld::make_model(model_name);
        if (static_cast<Eigen::Index>(theta_dim) != model->param_dim())
            throw std::invalid_argument("theta_dim does not match the model");
        const Eigen::MatrixXd y = copy_matrix(data, data_rows, dim);
        const gfetld::KernelSpec spec =
            bandwidth > 0.0 ? gfetld::make_kernel(bandwidth)
                            : gfetld::median_heuristic_bandwidth(y);
        gfetld::RngStream rng(
            gfetld::derive_seed(seed, gfetld::Role::latent, 0));
        const Eigen::MatrixXd latents =
            gfetld::draw_latents(*model, sims, rng);
        Eigen::VectorXd t0 =
            Eigen::Map<const Eigen::VectorXd>(theta,
                                              static_cast<Eigen::Index>(theta_dim));
        const Eigen::VectorXd est = gfetld::minimum_mmd_estimate(
            *model, y, t0, step_size, iters, spec, latents, objective);
        Eigen::Map<Eigen::VectorXd>(theta, static_cast<Eigen::Index>(theta_dim)) =
            est;
    });
}

}  // extern "C"

struct gfetld_experiment {
    std::vector<gfetld::ConfigEntry> entries;
    int override_count = 0;
    std::string report_json;
    bool has_report = false;
};

extern "C" {

gfetld_experiment* gfetld_experiment_create(void) {
    return new (std::nothrow) gfetld_experiment;
}

void gfetld_experiment_destroy(gfetld_experiment* exp) { delete exp; }

gfetld_status gfetld_experiment_set(gfetld_experiment* exp, const char* kv) {
    return guarded([&] {
        if (exp == nullptr) throw std::invalid_argument("null experiment handle");
        if (kv == nullptr) throw std::invalid_argument("null key=value token");
        exp->entries.push_back(
            gfetld::parse_override(kv, ++exp->override_count));
    });
}

gfetld_status gfetld_experiment_load_file(gfetld_experiment* exp,
                                          const char* path) {
    return guarded([&] {
        if (exp == nullptr) throw std::invalid_argument("null experiment handle");
        if (path == nullptr) throw std::invalid_argument("null config path");
        auto parsed = gfetld::parse_config_file(path);
        exp->entries.insert(exp->entries.end(), parsed.begin(), parsed.end());
    });
}

gfetld_status gfetld_experiment_run(gfetld_experiment* exp,
                                    const char* output_dir) {
    bool all_failed = false;
    const gfetld_status st = guarded([&] {
        if (exp == nullptr) throw std::invalid_argument("null experiment handle");
        const gfetld::ExperimentConfig cfg =
            gfetld::resolve_config(exp->entries);
        std::string dir =
            output_dir != nullptr && output_dir[0] != '\0' ? output_dir
                                                           : cfg.output_dir;
        if (dir.empty())
            throw gfetld::ConfigError(
                "no output directory (pass one or set output_dir)");
        const gfetld::ExperimentReport report = gfetld::run_experiment(cfg);
        gfetld::emit_outputs(report, dir);
        exp->report_json = gfetld::report_to_json(report);
        exp->has_report = true;
        all_failed = report.all_failed;
    });
    if (st != GFETLD_OK) return st;
    if (all_failed) {
        g_last_error = "every repetition failed; see the report for details";
        return GFETLD_ERR_DIVERGENCE;
    }
    return GFETLD_OK;
}

const char* gfetld_experiment_report_json(const gfetld_experiment* exp) {
    if (exp == nullptr || !exp->has_report) return nullptr;
    return exp->report_json.c_str();
}

}  // extern "C"
