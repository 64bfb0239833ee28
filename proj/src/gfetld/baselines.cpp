#include "gfetld/baselines.hpp"

#include <cmath>
#include <stdexcept>

namespace gfetld {

PosteriorMoments conjugate_gaussian_posterior(double mu0, double var0,
                                              const SampleBatch& data,
                                              double likelihood_sd) {
    if (!(var0 > 0.0) || !std::isfinite(mu0))
        throw std::invalid_argument("conjugate posterior: bad prior moments");
    if (!(likelihood_sd > 0.0))
        throw std::invalid_argument("conjugate posterior: likelihood sd must be > 0");
    if (data.size() > 0 && data.cols() != 1)
        throw std::invalid_argument("conjugate posterior: data must be scalar");
    const double n = static_cast<double>(data.rows());
    const double lik_prec = 1.0 / (likelihood_sd * likelihood_sd);
    const double prec = 1.0 / var0 + n * lik_prec;
    const double mean = (mu0 / var0 + data.sum() * lik_prec) / prec;
    return PosteriorMoments{mean, 1.0 / prec};
}

GridPosterior grid_posterior_uniform(const SampleBatch& data,
                                     const GaussianPrior& prior,
                                     double half_width, const GridSpec& grid,
                                     double floor_likelihood) {
    if (data.rows() < 1 || data.cols() != 1)
        throw std::invalid_argument("grid posterior: data must be scalar rows");
    if (prior.dim() != 1)
        throw std::invalid_argument("grid posterior: prior must be 1-D");
    if (!(half_width > 0.0))
        throw std::invalid_argument("grid posterior: half width must be > 0");
    if (grid.points < 2 || !(grid.hi > grid.lo))
        throw std::invalid_argument("grid posterior: bad grid");
    if (!(floor_likelihood > 0.0))
        throw std::invalid_argument("grid posterior: floor must be > 0");

    const double log_in = std::log(0.5 / half_width);
    const double log_floor = std::log(floor_likelihood);
    const double mu0 = prior.mean[0], var0 = prior.variance[0];

    GridPosterior post;
    post.grid = Eigen::VectorXd::LinSpaced(grid.points, grid.lo, grid.hi);
    post.log_weights.resize(grid.points);
    post.degenerate = true;
    for (int i = 0; i < grid.points; ++i) {
        const double theta = post.grid[i];
        double lw = -0.5 * (theta - mu0) * (theta - mu0) / var0;
        int floored = 0;
        for (Eigen::Index n = 0; n < data.rows(); ++n) {
            if (std::abs(data(n, 0) - theta) <= half_width) {
                lw += log_in;
            } else {
                lw += log_floor;
                ++floored;
            }
        }
        if (floored == 0) post.degenerate = false;
        post.log_weights[i] = lw;
    }

    // Log-sum-exp normalization.
    const double lmax = post.log_weights.maxCoeff();
    Eigen::VectorXd w = (post.log_weights.array() - lmax).exp();
    post.weights = w / w.sum();
    return post;
}

double support_interval_midpoint(const SampleBatch& data) {
    if (data.rows() < 1 || data.cols() != 1)
        throw std::invalid_argument("support midpoint: data must be scalar rows");
    return 0.5 * (data.minCoeff() + data.maxCoeff());
}

Eigen::VectorXd rmse(const std::vector<Eigen::VectorXd>& estimates,
                     const Eigen::VectorXd& truth) {
    if (estimates.empty())
        throw std::invalid_argument("rmse: no estimates");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(truth.size());
    for (const auto& e : estimates) {
        if (e.size() != truth.size())
            throw std::invalid_argument("rmse: estimate dimension mismatch");
        acc += (e - truth).cwiseAbs2();
    }
    return (acc / static_cast<double>(estimates.size())).cwiseSqrt();
}

}  // namespace gfetld
