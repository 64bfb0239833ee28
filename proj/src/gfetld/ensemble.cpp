#include "gfetld/ensemble.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/LU>

namespace gfetld {

namespace {

void check_particles(const Eigen::MatrixXd& p, const char* where,
                     Eigen::Index min_rows = 2) {
    if (p.rows() < min_rows)
        throw std::invalid_argument(std::string(where) +
                                    ": ensemble needs at least 2 particles");
    if (p.cols() < 1)
        throw std::invalid_argument(std::string(where) + ": empty parameter dim");
}

void check_outputs(const Eigen::MatrixXd& p, const OutputBatch& out,
                   const char* where) {
    if (out.seed_count() < 1)
        throw std::invalid_argument(std::string(where) + ": empty output batch");
    for (const auto& block : out.by_seed)
        if (block.rows() != p.rows() || block.cols() != out.output_dim())
            throw std::invalid_argument(std::string(where) +
                                        ": ragged output batch");
}

}  // namespace

Eigen::VectorXd ensemble_mean(const Eigen::MatrixXd& particles) {
    check_particles(particles, "ensemble_mean", 1);
    return particles.colwise().mean();
}

Eigen::MatrixXd ensemble_covariance(const Eigen::MatrixXd& particles) {
    check_particles(particles, "ensemble_covariance");
    const Eigen::Index M = particles.rows();
    Eigen::MatrixXd dev = particles.rowwise() - particles.colwise().mean();
    return (dev.transpose() * dev) / static_cast<double>(M);
}

Eigen::MatrixXd generalized_sqrt(const Eigen::MatrixXd& particles) {
    check_particles(particles, "generalized_sqrt");
    const Eigen::Index M = particles.rows();
    Eigen::MatrixXd dev = particles.rowwise() - particles.colwise().mean();
    return dev.transpose() / std::sqrt(static_cast<double>(M));
}

Eigen::MatrixXd cross_covariance(const Eigen::MatrixXd& particles,
                                 const OutputBatch& out, Eigen::Index seed_index) {
    check_particles(particles, "cross_covariance");
    check_outputs(particles, out, "cross_covariance");
    if (seed_index < 0 || seed_index >= out.seed_count())
        throw std::invalid_argument("cross_covariance: seed index out of range");
    const Eigen::Index M = particles.rows();
    Eigen::MatrixXd pdev = particles.rowwise() - particles.colwise().mean();
    const Eigen::MatrixXd& x = out.by_seed[static_cast<std::size_t>(seed_index)];
    Eigen::MatrixXd xdev = x.rowwise() - x.colwise().mean();
    return (pdev.transpose() * xdev) / static_cast<double>(M);
}

EnsembleStats compute_stats(const Eigen::MatrixXd& particles,
                            const OutputBatch* out) {
    check_particles(particles, "compute_stats");
    const Eigen::Index M = particles.rows();
    EnsembleStats s;
    s.mean = particles.colwise().mean();
    Eigen::MatrixXd dev = particles.rowwise() - s.mean.transpose();
    s.cov = (dev.transpose() * dev) / static_cast<double>(M);
    s.sqrt = dev.transpose() / std::sqrt(static_cast<double>(M));
    if (out != nullptr) {
        check_outputs(particles, *out, "compute_stats");
        const Eigen::Index J = out->seed_count(), N = out->output_dim();
        s.seed_means.resize(J, N);
        s.cross.reserve(static_cast<std::size_t>(J));
        for (Eigen::Index j = 0; j < J; ++j) {
            const Eigen::MatrixXd& x = out->by_seed[static_cast<std::size_t>(j)];
            Eigen::RowVectorXd xbar = x.colwise().mean();
            s.seed_means.row(j) = xbar;
            Eigen::MatrixXd xdev = x.rowwise() - xbar;
            s.cross.push_back((dev.transpose() * xdev) / static_cast<double>(M));
        }
    }
    return s;
}

Eigen::MatrixXd affine_forward(const Eigen::MatrixXd& particles,
                               const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
    if (A.rows() != A.cols() || A.rows() != particles.cols() || b.size() != A.rows())
        throw std::invalid_argument("affine_forward: shape mismatch");
    return (particles * A.transpose()).rowwise() + b.transpose();
}

Eigen::MatrixXd affine_inverse(const Eigen::MatrixXd& particles,
                               const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
    if (A.rows() != A.cols() || A.rows() != particles.cols() || b.size() != A.rows())
        throw std::invalid_argument("affine_inverse: shape mismatch");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible())
        throw SingularMatrixError("affine_inverse: transform matrix is singular");
    Eigen::MatrixXd shifted = particles.rowwise() - b.transpose();
    // Solve A z = theta - b row-wise: z^T = (theta-b)^T A^{-T}.
    return lu.solve(shifted.transpose()).transpose();
}

}  // namespace gfetld
