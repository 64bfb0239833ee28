#pragma once

#include <Eigen/Core>

#include "gfetld/errors.hpp"

namespace gfetld {

// Rows are samples, columns are coordinates.
using SampleBatch = Eigen::MatrixXd;

// Gaussian kernel k(x,y) = exp(-||x-y||^2 / (2 gamma^2)).
struct KernelSpec {
    double bandwidth = 1.0;  // gamma, finite and > 0
};

// Validates gamma; throws std::invalid_argument otherwise.
KernelSpec make_kernel(double bandwidth);

double eval_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                   const KernelSpec& spec);

// d/dx k(x,y) = -((x-y)/gamma^2) * k(x,y).
Eigen::VectorXd kernel_gradient_x(const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& y,
                                  const KernelSpec& spec);

// Median of all pairwise Euclidean distances (ties and zeros included).
// Throws DegenerateDataError on fewer than 2 rows or a zero median.
KernelSpec median_heuristic_bandwidth(const SampleBatch& data);

// Unbiased U-statistic; both batches need >= 2 rows. Value lies in (-2, 2).
double mmd2_unbiased(const SampleBatch& x, const SampleBatch& y,
                     const KernelSpec& spec);

// Biased V-statistic (diagonal terms kept); always >= 0, 0 for X == Y.
double mmd2_vstat(const SampleBatch& x, const SampleBatch& y,
                  const KernelSpec& spec);

}  // namespace gfetld
