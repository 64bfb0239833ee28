#include "gfetld/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace gfetld {

namespace {

void check_batch(const SampleBatch& b, const char* name) {
    if (b.rows() < 1 || b.cols() < 1)
        throw std::invalid_argument(std::string(name) + ": empty sample batch");
    if (!b.allFinite())
        throw std::invalid_argument(std::string(name) + ": non-finite entries");
}

void check_same_dim(const SampleBatch& x, const SampleBatch& y) {
    if (x.cols() != y.cols())
        throw std::invalid_argument("sample batches have mismatched dimensions");
}

inline double kval(double sq_dist, double gamma) {
    return std::exp(-sq_dist / (2.0 * gamma * gamma));
}

}  // namespace

KernelSpec make_kernel(double bandwidth) {
    if (!std::isfinite(bandwidth) || bandwidth <= 0.0)
        throw std::invalid_argument("kernel bandwidth must be finite and > 0");
    return KernelSpec{bandwidth};
}

double eval_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                   const KernelSpec& spec) {
    if (x.size() != y.size())
        throw std::invalid_argument("eval_kernel: dimension mismatch");
    return kval((x - y).squaredNorm(), spec.bandwidth);
}

Eigen::VectorXd kernel_gradient_x(const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& y,
                                  const KernelSpec& spec) {
    if (x.size() != y.size())
        throw std::invalid_argument("kernel_gradient_x: dimension mismatch");
    const double g2 = spec.bandwidth * spec.bandwidth;
    const Eigen::VectorXd diff = x - y;
    return (-kval(diff.squaredNorm(), spec.bandwidth) / g2) * diff;
}

KernelSpec median_heuristic_bandwidth(const SampleBatch& data) {
    check_batch(data, "median_heuristic_bandwidth");
    const Eigen::Index n = data.rows();
    if (n < 2)
        throw DegenerateDataError(
            "median_heuristic_bandwidth: need at least 2 rows");
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            dists.push_back((data.row(i) - data.row(j)).norm());
    std::sort(dists.begin(), dists.end());
    const std::size_t m = dists.size();
    const double median = (m % 2 == 1)
                              ? dists[m / 2]
                              : 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
    if (median <= 0.0)
        throw DegenerateDataError(
            "median_heuristic_bandwidth: zero median distance");
    return KernelSpec{median};
}

double mmd2_unbiased(const SampleBatch& x, const SampleBatch& y,
                     const KernelSpec& spec) {
    check_batch(x, "mmd2_unbiased/x");
    check_batch(y, "mmd2_unbiased/y");
    check_same_dim(x, y);
    const Eigen::Index J = x.rows(), N = y.rows();
    if (J < 2 || N < 2)
        throw std::invalid_argument("mmd2_unbiased: need >= 2 rows per batch");
    const double g = spec.bandwidth;
    // Extended-precision accumulators keep the Gram sums stable.
    long double sxx = 0.0L, syy = 0.0L, sxy = 0.0L;
    for (Eigen::Index j = 0; j < J; ++j)
        for (Eigen::Index l = 0; l < J; ++l)
            if (l != j) sxx += kval((x.row(j) - x.row(l)).squaredNorm(), g);
    for (Eigen::Index n = 0; n < N; ++n)
        for (Eigen::Index m = 0; m < N; ++m)
            if (m != n) syy += kval((y.row(n) - y.row(m)).squaredNorm(), g);
    for (Eigen::Index j = 0; j < J; ++j)
        for (Eigen::Index n = 0; n < N; ++n)
            sxy += kval((x.row(j) - y.row(n)).squaredNorm(), g);
    const long double v = sxx / (static_cast<long double>(J) * (J - 1)) +
                          syy / (static_cast<long double>(N) * (N - 1)) -
                          2.0L * sxy / (static_cast<long double>(J) * N);
    return static_cast<double>(v);
}

double mmd2_vstat(const SampleBatch& x, const SampleBatch& y,
                  const KernelSpec& spec) {
    check_batch(x, "mmd2_vstat/x");
    check_batch(y, "mmd2_vstat/y");
    check_same_dim(x, y);
    const Eigen::Index J = x.rows(), N = y.rows();
    const double g = spec.bandwidth;
    long double sxx = 0.0L, syy = 0.0L, sxy = 0.0L;
    for (Eigen::Index j = 0; j < J; ++j)
        for (Eigen::Index l = 0; l < J; ++l)
            sxx += kval((x.row(j) - x.row(l)).squaredNorm(), g);
    for (Eigen::Index n = 0; n < N; ++n)
        for (Eigen::Index m = 0; m < N; ++m)
            syy += kval((y.row(n) - y.row(m)).squaredNorm(), g);
    for (Eigen::Index j = 0; j < J; ++j)
        for (Eigen::Index n = 0; n < N; ++n)
            sxy += kval((x.row(j) - y.row(n)).squaredNorm(), g);
    const long double v = sxx / (static_cast<long double>(J) * J) +
                          syy / (static_cast<long double>(N) * N) -
                          2.0L * sxy / (static_cast<long double>(J) * N);
    // The population quantity is a squared RKHS norm; clamp fp residue.
    return std::max(0.0, static_cast<double>(v));
}

}  // namespace gfetld
