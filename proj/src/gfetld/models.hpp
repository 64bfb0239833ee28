#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gfetld/errors.hpp"
#include "gfetld/kernel.hpp"
#include "gfetld/rng.hpp"

namespace gfetld {

enum class LatentKind { standard_normal, uniform_unit };

// Deterministic map (theta, u) -> output; all randomness lives in u.
class GenerativeModel {
  public:
    virtual ~GenerativeModel() = default;

    virtual std::string name() const = 0;
    virtual Eigen::Index param_dim() const = 0;
    virtual Eigen::Index output_dim() const = 0;
    virtual Eigen::Index latent_dim() const = 0;
    virtual LatentKind latent_kind() const { return LatentKind::standard_normal; }
    virtual std::vector<std::string> param_names() const;

    virtual Eigen::VectorXd simulate(const Eigen::VectorXd& theta,
                                     const Eigen::VectorXd& u) const = 0;

    virtual bool has_jacobian() const { return false; }
    // d simulate / d theta, output_dim x param_dim. Throws CapabilityError
    // unless has_jacobian().
    virtual Eigen::MatrixXd jacobian(const Eigen::VectorXd& theta,
                                     const Eigen::VectorXd& u) const;
};

// G_theta(u) = theta + u with u ~ N(0,1); D = N = 1.
class GaussianLocationModel final : public GenerativeModel {
  public:
    std::string name() const override { return "gaussian_location"; }
    Eigen::Index param_dim() const override { return 1; }
    Eigen::Index output_dim() const override { return 1; }
    Eigen::Index latent_dim() const override { return 1; }
    Eigen::VectorXd simulate(const Eigen::VectorXd& theta,
                             const Eigen::VectorXd& u) const override;
    bool has_jacobian() const override { return true; }
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& theta,
                             const Eigen::VectorXd& u) const override;
};

// G_theta(u) = theta + (2u - 1) with u ~ U[0,1]: samples U([theta-1, theta+1]).
class UniformLocationModel final : public GenerativeModel {
  public:
    std::string name() const override { return "uniform_location"; }
    Eigen::Index param_dim() const override { return 1; }
    Eigen::Index output_dim() const override { return 1; }
    Eigen::Index latent_dim() const override { return 1; }
    LatentKind latent_kind() const override { return LatentKind::uniform_unit; }
    Eigen::VectorXd simulate(const Eigen::VectorXd& theta,
                             const Eigen::VectorXd& u) const override;
    bool has_jacobian() const override { return true; }
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& theta,
                             const Eigen::VectorXd& u) const override;
};

// ---------------------------------------------------------------------------
// Stochastic Lorenz-96 with AR(1)-in-time forcing residuals.

struct Lorenz96Params {
    double b0 = 0.0;
    double b1 = 0.0;
    double phi = 0.0;
    double sigma_e = 0.0;
    static Lorenz96Params from_vector(const Eigen::VectorXd& theta);
};

struct Lorenz96Config {
    int K = 8;                    // state dimension (cyclic)
    double F = 10.0;              // constant forcing
    double dt = 3.0 / 40.0;       // macro time step
    double T = 2.5;               // horizon; n_steps = floor(T/dt)
    int spinup_steps = 100;       // deterministic RK4 steps before t=0
    bool shared_residual = false; // one AR(1) residual shared across sites
    // Per-step saturation just above the data-generating regime (forced
    // trajectories at plausible theta stay below |y| ~ 9; only far prior
    // tails reach it): wild parameter draws yield pegged, sanely scaled
    // trajectories instead of astronomically large outputs that would
    // dominate every ensemble cross-covariance.
    double state_clip = 12.0;

    int n_steps() const { return static_cast<int>(T / dt); }
    void validate() const;
};

// Cyclic drift dy_k = -y_{k-1}(y_{k-2} - y_{k+1}) - y_k + F - g_k; K >= 4.
Eigen::VectorXd lorenz96_drift(const Eigen::VectorXd& y, double F,
                               const Eigen::VectorXd& g);

// One classical RK4 step with the forcing vector g held fixed.
Eigen::VectorXd lorenz96_rk4_step(const Eigen::VectorXd& y, double F,
                                  const Eigen::VectorXd& g, double dt);

// r' = phi r + sigma_e sqrt(1 - phi^2) eta; requires |phi| < 1.
double ar1_update(double r_prev, double phi, double sigma_e, double eta);

// g_k = b0 + b1 y_k + ar1_update(r_prev, ...); the AR part is shared with
// the residual recursion.
double stochastic_forcing(double y_k, double r_prev, double eta,
                          const Lorenz96Params& p);

// Output: the K state components after each macro step, time-major
// (dim = n_steps * K). theta = (b0, b1, phi, sigma_e); u supplies the
// n_steps*K standard-normal eta draws, step-major.
class Lorenz96Model final : public GenerativeModel {
  public:
    explicit Lorenz96Model(Lorenz96Config cfg = {});

    std::string name() const override { return "lorenz96_stochastic"; }
    Eigen::Index param_dim() const override { return 4; }
    Eigen::Index output_dim() const override { return cfg_.n_steps() * cfg_.K; }
    Eigen::Index latent_dim() const override { return cfg_.n_steps() * cfg_.K; }
    std::vector<std::string> param_names() const override {
        return {"b0", "b1", "phi", "sigma_e"};
    }
    Eigen::VectorXd simulate(const Eigen::VectorXd& theta,
                             const Eigen::VectorXd& u) const override;

    const Lorenz96Config& config() const { return cfg_; }
    const Eigen::VectorXd& initial_state() const { return initial_state_; }

  private:
    Lorenz96Config cfg_;
    Eigen::VectorXd initial_state_;  // spun-up, theta-independent
};

std::unique_ptr<GenerativeModel> make_model(const std::string& name,
                                            const Lorenz96Config& l96 = {});

// ---------------------------------------------------------------------------

struct ContaminationSpec {
    double epsilon = 0.0;      // fraction in [0, 1]
    double outlier_mean = 10.0;
    double outlier_sd = 1.0;
};

// Replaces round(epsilon * rows) rows with N(outlier_mean, outlier_sd^2)
// draws at rng-chosen indices. epsilon = 0 returns the input unchanged.
SampleBatch contaminate(const SampleBatch& clean, const ContaminationSpec& spec,
                        RngStream& rng);

}  // namespace gfetld
