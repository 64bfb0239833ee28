#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "gfetld/ensemble.hpp"
#include "gfetld/errors.hpp"
#include "gfetld/kernel.hpp"
#include "gfetld/models.hpp"
#include "gfetld/rng.hpp"

namespace gfetld {

enum class LatentPolicy { resample_each_step, frozen };
enum class NoiseRoot { generalized, symmetric };
enum class Algorithm { gradient_free, gradient };

struct SamplerConfig {
    int particle_count = 100;     // M
    int sims_per_particle = 20;   // J shared latent seeds per step
    double step_size = 1e-3;      // Delta s
    double beta = 1.0;            // temperature, >= 0 (0 targets the prior)
    int n_steps = 1000;
    std::uint64_t seed = 0;
    LatentPolicy latent_policy = LatentPolicy::resample_each_step;
    double jitter = 0.0;          // ridge added to C in the prior-drift product
    int burn_in = 0;
    NoiseRoot noise_root = NoiseRoot::generalized;
    Algorithm algorithm = Algorithm::gradient_free;
    int thin = 0;                 // 0 = keep no trajectory
    int diag_interval = 1;        // 0 = no per-step MMD diagnostics
    bool average_trajectory = false;

    void validate() const;
};

struct PriorScore {
    virtual ~PriorScore() = default;
    virtual Eigen::VectorXd score(const Eigen::VectorXd& theta) const = 0;
};

// Independent Gaussian prior N(mean, diag(variance)).
struct GaussianPrior final : PriorScore {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;

    GaussianPrior() = default;
    GaussianPrior(Eigen::VectorXd m, Eigen::VectorXd v);

    Eigen::VectorXd score(const Eigen::VectorXd& theta) const override;
    Eigen::VectorXd draw(RngStream& rng) const;
    Eigen::Index dim() const { return mean.size(); }
};

// Draws the J shared latent seeds for one step (row j = u^j).
Eigen::MatrixXd draw_latents(const GenerativeModel& model, int count,
                             RngStream& rng);

// Evaluates the model on every (particle, latent seed) pair.
OutputBatch simulate_outputs(const GenerativeModel& model,
                             const Eigen::MatrixXd& particles,
                             const Eigen::MatrixXd& latents);

// Row j = G(theta, u^j) for a single parameter vector.
SampleBatch simulate_batch(const GenerativeModel& model,
                           const Eigen::VectorXd& theta,
                           const Eigen::MatrixXd& latents);

// Gradient-free MMD drift: row m is
//   g^m = 2/(J(J-1)) sum_{j != l} C^{theta x^j} grad_x k(x^{mj}, x^{ml})
//       - 2/(J N)    sum_{j, n}  C^{theta x^j} grad_x k(x^{mj}, y^n).
// stats must come from the same (particles, out) snapshot. When mmd_out is
// non-null it receives the per-particle unbiased MMD^2 (data_term supplies
// the particle-independent data-data component, 0 when N == 1).
Eigen::MatrixXd mmd_drift_g(const Eigen::MatrixXd& particles,
                            const OutputBatch& out, const SampleBatch& data,
                            const KernelSpec& spec, const EnsembleStats& stats,
                            Eigen::VectorXd* mmd_out = nullptr,
                            double data_term = 0.0);

// Exact gradient of the U-statistic MMD^2 at theta with frozen latents U,
// contracting model Jacobians against kernel gradients. Requires a model
// with has_jacobian().
Eigen::VectorXd grad_mmd2_exact(const Eigen::VectorXd& theta,
                                const GenerativeModel& model,
                                const Eigen::MatrixXd& latents,
                                const SampleBatch& data, const KernelSpec& spec);

// Finite-ensemble correction ((D+1)/M) (theta^m - mean), row per particle.
Eigen::MatrixXd aldi_correction(const Eigen::MatrixXd& particles);

struct StepDiag {
    double data_term = 0.0;   // in: precomputed data-data U-statistic term
    double mean_mmd2 = 0.0;   // out: ensemble average of per-particle MMD^2
    bool computed = false;
};

// One Euler-Maruyama step of the interacting particle system
//   d theta = [C grad log prior - beta g + ((D+1)/M)(theta - mean)] ds
//           + sqrt(2) C^{1/2} dW,
// batch-synchronous: all statistics from the pre-update ensemble.
Eigen::MatrixXd gf_etld_step(const Eigen::MatrixXd& particles,
                             const SampleBatch& data, const GenerativeModel& model,
                             const PriorScore& prior, const KernelSpec& spec,
                             const SamplerConfig& cfg, int step_index,
                             StepDiag* diag = nullptr);

// Same update with beta C grad MMD^2(theta^m) in place of beta g^m; needs a
// Jacobian-bearing model.
Eigen::MatrixXd gradient_etld_step(const Eigen::MatrixXd& particles,
                                   const SampleBatch& data,
                                   const GenerativeModel& model,
                                   const PriorScore& prior, const KernelSpec& spec,
                                   const SamplerConfig& cfg, int step_index,
                                   StepDiag* diag = nullptr);

struct ChainResult {
    Eigen::MatrixXd final_particles;
    Eigen::VectorXd posterior_mean;
    Eigen::MatrixXd posterior_cov;
    std::vector<int> diag_steps;
    std::vector<double> diag_mean_mmd2;
    std::vector<int> trajectory_steps;
    std::vector<Eigen::MatrixXd> trajectory;
    int steps_completed = 0;
};

// Initial ensemble i.i.d. from the prior, then cfg.n_steps steps of the
// configured algorithm. Divergence surfaces as DivergenceError with the
// offending step index.
ChainResult run_chain(const GenerativeModel& model, const SampleBatch& data,
                      const GaussianPrior& prior, const KernelSpec& spec,
                      const SamplerConfig& cfg);

// Fixed-step gradient descent on the U-statistic MMD^2 with frozen latents.
// Descent is monitored, not guaranteed; objective_out receives the final
// objective value when non-null.
Eigen::VectorXd minimum_mmd_estimate(const GenerativeModel& model,
                                     const SampleBatch& data,
                                     const Eigen::VectorXd& theta0, double step,
                                     int iters, const KernelSpec& spec,
                                     const Eigen::MatrixXd& latents,
                                     double* objective_out = nullptr);

}  // namespace gfetld
