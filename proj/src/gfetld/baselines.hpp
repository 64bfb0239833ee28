#pragma once

#include <vector>

#include <Eigen/Core>

#include "gfetld/errors.hpp"
#include "gfetld/kernel.hpp"
#include "gfetld/sampler.hpp"

namespace gfetld {

struct PosteriorMoments {
    double mean = 0.0;
    double variance = 0.0;
};

// Closed-form posterior for a N(theta, sd^2) likelihood with N(mu0, var0)
// prior: precision-weighted combination. Empty data returns the prior.
PosteriorMoments conjugate_gaussian_posterior(double mu0, double var0,
                                              const SampleBatch& data,
                                              double likelihood_sd = 1.0);

struct GridSpec {
    double lo = -5.0;
    double hi = 12.0;
    int points = 3401;
};

struct GridPosterior {
    Eigen::VectorXd grid;
    Eigen::VectorXd log_weights;  // unnormalized
    Eigen::VectorXd weights;      // normalized, sums to 1
    bool degenerate = false;      // no grid point is compatible with all data
    double mean() const { return grid.dot(weights); }
};

// Standard-Bayes posterior for the U([theta-h, theta+h]) likelihood on a
// fixed grid. Incompatible data contribute the per-datum floor likelihood;
// degenerate flags the case where every grid point has at least one floored
// datum (empty support intersection).
GridPosterior grid_posterior_uniform(const SampleBatch& data,
                                     const GaussianPrior& prior,
                                     double half_width = 1.0,
                                     const GridSpec& grid = {},
                                     double floor_likelihood = 1e-12);

// Midpoint of the formal support interval [max(y)-h, min(y)+h]: the
// continuation of the proper-case posterior mean once the intersection is
// empty (classic non-robustness of the uniform location posterior).
double support_interval_midpoint(const SampleBatch& data);

// Componentwise sqrt(mean((estimate - truth)^2)) over runs.
Eigen::VectorXd rmse(const std::vector<Eigen::VectorXd>& estimates,
                     const Eigen::VectorXd& truth);

}  // namespace gfetld
