#include "gfetld/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gfetld {

namespace {

void check_theta(const GenerativeModel& m, const Eigen::VectorXd& theta) {
    if (theta.size() != m.param_dim())
        throw std::invalid_argument(m.name() + ": theta has wrong dimension");
    if (!theta.allFinite())
        throw std::invalid_argument(m.name() + ": non-finite theta");
}

void check_latent(const GenerativeModel& m, const Eigen::VectorXd& u) {
    if (u.size() != m.latent_dim())
        throw std::invalid_argument(m.name() + ": latent has wrong dimension");
    if (!u.allFinite())
        throw std::invalid_argument(m.name() + ": non-finite latent");
}

// No-allocation drift kernel shared by the public op and the simulator.
void drift_into(const Eigen::VectorXd& y, double F, const Eigen::VectorXd& g,
                Eigen::VectorXd& out) {
    const Eigen::Index K = y.size();
    for (Eigen::Index k = 0; k < K; ++k) {
        const Eigen::Index km1 = (k - 1 + K) % K;
        const Eigen::Index km2 = (k - 2 + K) % K;
        const Eigen::Index kp1 = (k + 1) % K;
        out[k] = -y[km1] * (y[km2] - y[kp1]) - y[k] + F - g[k];
    }
}

// Caps the AR(1) residual in the non-stationary extension (|phi| >= 1) so
// RK4 stage products stay finite for arbitrarily wild prior draws.
constexpr double kResidualClip = 1e6;

struct Rk4Workspace {
    Eigen::VectorXd k1, k2, k3, k4, tmp;
    explicit Rk4Workspace(Eigen::Index K) : k1(K), k2(K), k3(K), k4(K), tmp(K) {}
};

void rk4_into(Eigen::VectorXd& y, double F, const Eigen::VectorXd& g, double dt,
              Rk4Workspace& w) {
    drift_into(y, F, g, w.k1);
    w.tmp = y + (0.5 * dt) * w.k1;
    drift_into(w.tmp, F, g, w.k2);
    w.tmp = y + (0.5 * dt) * w.k2;
    drift_into(w.tmp, F, g, w.k3);
    w.tmp = y + dt * w.k3;
    drift_into(w.tmp, F, g, w.k4);
    y += (dt / 6.0) * (w.k1 + 2.0 * w.k2 + 2.0 * w.k3 + w.k4);
}

}  // namespace

std::vector<std::string> GenerativeModel::param_names() const {
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(param_dim()));
    for (Eigen::Index i = 0; i < param_dim(); ++i)
        names.push_back("theta_" + std::to_string(i + 1));
    return names;
}

Eigen::MatrixXd GenerativeModel::jacobian(const Eigen::VectorXd&,
                                          const Eigen::VectorXd&) const {
    throw CapabilityError(name() + ": model does not provide a Jacobian");
}

Eigen::VectorXd GaussianLocationModel::simulate(const Eigen::VectorXd& theta,
                                                const Eigen::VectorXd& u) const {
    check_theta(*this, theta);
    check_latent(*this, u);
    return Eigen::VectorXd::Constant(1, theta[0] + u[0]);
}

Eigen::MatrixXd GaussianLocationModel::jacobian(const Eigen::VectorXd& theta,
                                                const Eigen::VectorXd& u) const {
    check_theta(*this, theta);
    check_latent(*this, u);
    return Eigen::MatrixXd::Identity(1, 1);
}

Eigen::VectorXd UniformLocationModel::simulate(const Eigen::VectorXd& theta,
                                               const Eigen::VectorXd& u) const {
    check_theta(*this, theta);
    check_latent(*this, u);
    if (u[0] < 0.0 || u[0] > 1.0)
        throw std::invalid_argument("uniform_location: latent outside [0, 1]");
    return Eigen::VectorXd::Constant(1, theta[0] + (2.0 * u[0] - 1.0));
}

Eigen::MatrixXd UniformLocationModel::jacobian(const Eigen::VectorXd& theta,
                                               const Eigen::VectorXd& u) const {
    check_theta(*this, theta);
    check_latent(*this, u);
    return Eigen::MatrixXd::Identity(1, 1);
}

// ---------------------------------------------------------------------------

Lorenz96Params Lorenz96Params::from_vector(const Eigen::VectorXd& theta) {
    if (theta.size() != 4)
        throw std::invalid_argument("lorenz96: theta must be (b0, b1, phi, sigma_e)");
    if (!theta.allFinite())
        throw std::invalid_argument("lorenz96: non-finite theta");
    return Lorenz96Params{theta[0], theta[1], theta[2], theta[3]};
}

void Lorenz96Config::validate() const {
    if (K < 4) throw std::invalid_argument("lorenz96: K must be >= 4");
    if (!(dt > 0.0) || !(T > 0.0) || n_steps() < 1)
        throw std::invalid_argument("lorenz96: need dt > 0 and T >= dt");
    if (spinup_steps < 0)
        throw std::invalid_argument("lorenz96: negative spin-up");
    if (!(state_clip > 0.0) || !std::isfinite(F))
        throw std::invalid_argument("lorenz96: bad F or state clip");
}

Eigen::VectorXd lorenz96_drift(const Eigen::VectorXd& y, double F,
                               const Eigen::VectorXd& g) {
    if (y.size() < 4)
        throw std::invalid_argument("lorenz96_drift: state dimension must be >= 4");
    if (g.size() != y.size())
        throw std::invalid_argument("lorenz96_drift: forcing dimension mismatch");
    Eigen::VectorXd out(y.size());
    drift_into(y, F, g, out);
    return out;
}

Eigen::VectorXd lorenz96_rk4_step(const Eigen::VectorXd& y, double F,
                                  const Eigen::VectorXd& g, double dt) {
    if (y.size() < 4 || g.size() != y.size())
        throw std::invalid_argument("lorenz96_rk4_step: bad state/forcing shapes");
    if (!(dt > 0.0)) throw std::invalid_argument("lorenz96_rk4_step: dt must be > 0");
    Rk4Workspace w(y.size());
    Eigen::VectorXd out = y;
    rk4_into(out, F, g, dt, w);
    return out;
}

double ar1_update(double r_prev, double phi, double sigma_e, double eta) {
    if (!(std::abs(phi) < 1.0))
        throw std::invalid_argument("ar1_update: need |phi| < 1");
    if (!std::isfinite(r_prev) || !std::isfinite(sigma_e) || !std::isfinite(eta))
        throw std::invalid_argument("ar1_update: non-finite input");
    return phi * r_prev + sigma_e * std::sqrt(1.0 - phi * phi) * eta;
}

double stochastic_forcing(double y_k, double r_prev, double eta,
                          const Lorenz96Params& p) {
    return p.b0 + p.b1 * y_k + ar1_update(r_prev, p.phi, p.sigma_e, eta);
}

Lorenz96Model::Lorenz96Model(Lorenz96Config cfg) : cfg_(cfg) {
    cfg_.validate();
    // Spin-up is theta-independent: constant-F dynamics, zero extra forcing,
    // started from the slightly perturbed rest state.
    Eigen::VectorXd y = Eigen::VectorXd::Constant(cfg_.K, cfg_.F);
    y[0] += 0.01;
    const Eigen::VectorXd g0 = Eigen::VectorXd::Zero(cfg_.K);
    Rk4Workspace w(cfg_.K);
    for (int s = 0; s < cfg_.spinup_steps; ++s) rk4_into(y, cfg_.F, g0, cfg_.dt, w);
    initial_state_ = y;
}

Eigen::VectorXd Lorenz96Model::simulate(const Eigen::VectorXd& theta,
                                        const Eigen::VectorXd& u) const {
    check_theta(*this, theta);
    check_latent(*this, u);
    const Lorenz96Params p = Lorenz96Params::from_vector(theta);
    // Inside |phi| < 1 the residual is the stationary AR(1) with sd sigma_e.
    // Outside there is no stationary law, so extend with the same recursion
    // and innovation sd sigma_e * sqrt(|1 - phi^2|): continuous at the
    // boundary, and explosive draws yield outputs far from any data, giving
    // inference a slope to push them back instead of a flat spot.
    const double phi = p.phi;
    const double noise_scale = p.sigma_e * std::sqrt(std::abs(1.0 - phi * phi));
    const int K = cfg_.K, steps = cfg_.n_steps();

    Eigen::VectorXd y = initial_state_;
    Eigen::VectorXd r = Eigen::VectorXd::Zero(K);
    Eigen::VectorXd g(K);
    Eigen::VectorXd out(static_cast<Eigen::Index>(steps) * K);
    Rk4Workspace w(K);

    for (int t = 0; t < steps; ++t) {
        // Forcing frozen across the RK4 stages of this macro step; the AR
        // part doubles as the residual update.
        for (int k = 0; k < K; ++k) {
            const double eta = cfg_.shared_residual ? u[t * K] : u[t * K + k];
            const double ar = std::clamp(phi * r[k] + noise_scale * eta,
                                         -kResidualClip, kResidualClip);
            g[k] = p.b0 + p.b1 * y[k] + ar;
            r[k] = ar;
        }
        rk4_into(y, cfg_.F, g, cfg_.dt, w);
        if (!y.allFinite())
            throw DivergenceError("lorenz96: non-finite state at macro step " +
                                      std::to_string(t),
                                  t);
        // Saturate far outside the attractor so wild parameter draws stay
        // finite instead of aborting whole inference runs.
        y = y.cwiseMin(cfg_.state_clip).cwiseMax(-cfg_.state_clip);
        out.segment(static_cast<Eigen::Index>(t) * K, K) = y;
    }
    return out;
}

std::unique_ptr<GenerativeModel> make_model(const std::string& name,
                                            const Lorenz96Config& l96) {
    if (name == "gaussian_location") return std::make_unique<GaussianLocationModel>();
    if (name == "uniform_location") return std::make_unique<UniformLocationModel>();
    if (name == "lorenz96_stochastic") return std::make_unique<Lorenz96Model>(l96);
    throw ConfigError("unknown model: " + name);
}

// ---------------------------------------------------------------------------

SampleBatch contaminate(const SampleBatch& clean, const ContaminationSpec& spec,
                        RngStream& rng) {
    if (clean.rows() < 1) throw std::invalid_argument("contaminate: empty batch");
    if (!(spec.epsilon >= 0.0 && spec.epsilon <= 1.0))
        throw std::invalid_argument("contaminate: epsilon must lie in [0, 1]");
    if (!(spec.outlier_sd >= 0.0) || !std::isfinite(spec.outlier_mean))
        throw std::invalid_argument("contaminate: bad outlier parameters");
    const Eigen::Index n = clean.rows();
    const Eigen::Index k =
        static_cast<Eigen::Index>(std::llround(spec.epsilon * static_cast<double>(n)));
    if (k == 0) return clean;

    // Deterministic distinct indices: partial Fisher-Yates driven by rng.
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    for (Eigen::Index i = 0; i < k; ++i) {
        const Eigen::Index j =
            i + static_cast<Eigen::Index>(rng.next_u64() % static_cast<std::uint64_t>(n - i));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    SampleBatch out = clean;
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index c = 0; c < clean.cols(); ++c)
            out(idx[static_cast<std::size_t>(i)], c) =
                spec.outlier_mean + spec.outlier_sd * rng.normal();
    return out;
}

}  // namespace gfetld
