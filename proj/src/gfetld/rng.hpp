#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Core>

// Counter-free splittable RNG: every (seed, role, index...) tuple names an
// independent substream, so draws are bit-reproducible no matter how the
// surrounding loops are ordered or parallelised.

namespace gfetld {

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Hash-chain seed derivation (splitmix64 finalizer over mixed-in words).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = mix64(base + 0x9e3779b97f4a7c15ull);
    s = mix64(s ^ (a + 0x9e3779b97f4a7c15ull));
    s = mix64(s ^ (b + 0xbf58476d1ce4e5b9ull));
    s = mix64(s ^ (c + 0x94d049bb133111ebull));
    return s;
}

// Stream roles; fixed numeric tags are part of the reproducibility contract.
enum class Role : std::uint64_t {
    data = 1,         // observed-data generation
    contaminate = 2,  // outlier indices and values
    init = 3,         // initial ensemble draw
    latent = 4,       // per-step shared latent seeds u^1..u^J
    noise = 5,        // per-(step, particle) Gaussian increments
    probe = 6,        // bandwidth probe simulations
    chain = 7,        // experiment-level chain seed
};

inline std::uint64_t derive_seed(std::uint64_t base, Role role,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
    return derive_seed(base, static_cast<std::uint64_t>(role), a, b);
}

class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        return mix64(state_);
    }

    // Uniform on (0, 1]; never 0, safe under log().
    double uniform01() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1p-53;
    }

    // Standard normal via Box-Muller; pairs are consumed deterministically.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    Eigen::VectorXd normal_vector(Eigen::Index n) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

    // Row-major fill so a (rows x cols) draw reads one row stream at a time.
    Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal();
        return m;
    }

    Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = uniform01();
        return m;
    }

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace gfetld
