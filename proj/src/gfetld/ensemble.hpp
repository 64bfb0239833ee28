#pragma once

#include <vector>

#include <Eigen/Core>

#include "gfetld/errors.hpp"
#include "gfetld/kernel.hpp"

namespace gfetld {

// Simulator outputs for a particle ensemble: one (M x N) block per shared
// latent seed j = 0..J-1; block row m is x^{mj} = G(theta^m, u^j).
struct OutputBatch {
    std::vector<Eigen::MatrixXd> by_seed;

    Eigen::Index seed_count() const { return static_cast<Eigen::Index>(by_seed.size()); }
    Eigen::Index particle_count() const { return by_seed.empty() ? 0 : by_seed[0].rows(); }
    Eigen::Index output_dim() const { return by_seed.empty() ? 0 : by_seed[0].cols(); }
};

// All moments use 1/M normalization (no Bessel correction).
Eigen::VectorXd ensemble_mean(const Eigen::MatrixXd& particles);
Eigen::MatrixXd ensemble_covariance(const Eigen::MatrixXd& particles);

// Generalized square root C^{1/2} = (1/sqrt(M)) * deviations^T, a D x M
// factor with C^{1/2} (C^{1/2})^T = C exactly.
Eigen::MatrixXd generalized_sqrt(const Eigen::MatrixXd& particles);

// C^{theta x^j} = (1/M) sum_m (theta^m - mean)(x^{mj} - xbar^j)^T, D x N.
Eigen::MatrixXd cross_covariance(const Eigen::MatrixXd& particles,
                                 const OutputBatch& out, Eigen::Index seed_index);

// Everything the sampler needs from one pre-update ensemble snapshot.
struct EnsembleStats {
    Eigen::VectorXd mean;                 // D
    Eigen::MatrixXd cov;                  // D x D
    Eigen::MatrixXd sqrt;                 // D x M (generalized root)
    Eigen::MatrixXd seed_means;           // J x N, row j = xbar^j
    std::vector<Eigen::MatrixXd> cross;   // J blocks of D x N
};

// out == nullptr computes only the particle moments.
EnsembleStats compute_stats(const Eigen::MatrixXd& particles,
                            const OutputBatch* out = nullptr);

// theta -> A theta + b, applied row-wise.
Eigen::MatrixXd affine_forward(const Eigen::MatrixXd& particles,
                               const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

// theta -> A^{-1}(theta - b); throws SingularMatrixError when A is singular.
Eigen::MatrixXd affine_inverse(const Eigen::MatrixXd& particles,
                               const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

}  // namespace gfetld
