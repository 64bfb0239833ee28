#include "gfetld/sampler.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

namespace gfetld {

namespace {

void check_data_for(const GenerativeModel& model, const SampleBatch& data,
                    const char* where) {
    if (data.rows() < 1)
        throw std::invalid_argument(std::string(where) + ": empty data batch");
    if (data.cols() != model.output_dim())
        throw std::invalid_argument(std::string(where) +
                                    ": data dimension does not match model output");
    if (!data.allFinite())
        throw std::invalid_argument(std::string(where) + ": non-finite data");
}

// Symmetric PSD square root via eigendecomposition, tiny negatives clamped.
Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& C) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    if (es.info() != Eigen::Success)
        throw SingularMatrixError("symmetric_sqrt: eigendecomposition failed");
    Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

void SamplerConfig::validate() const {
    if (particle_count < 2)
        throw std::invalid_argument("sampler: need at least 2 particles");
    if (sims_per_particle < 2)
        throw std::invalid_argument("sampler: need at least 2 latent seeds");
    if (!(step_size > 0.0) || !std::isfinite(step_size))
        throw std::invalid_argument("sampler: step size must be finite and > 0");
    if (!(beta >= 0.0) || !std::isfinite(beta))
        throw std::invalid_argument("sampler: beta must be finite and >= 0");
    if (n_steps < 0) throw std::invalid_argument("sampler: negative step count");
    if (!(jitter >= 0.0)) throw std::invalid_argument("sampler: negative jitter");
    if (burn_in < 0 || thin < 0 || diag_interval < 0)
        throw std::invalid_argument("sampler: negative burn-in/thin/diag interval");
}

GaussianPrior::GaussianPrior(Eigen::VectorXd m, Eigen::VectorXd v)
    : mean(std::move(m)), variance(std::move(v)) {
    if (mean.size() != variance.size() || mean.size() < 1)
        throw std::invalid_argument("prior: mean/variance size mismatch");
    if (!mean.allFinite() || !variance.allFinite() || (variance.array() <= 0.0).any())
        throw std::invalid_argument("prior: variances must be finite and > 0");
}

Eigen::VectorXd GaussianPrior::score(const Eigen::VectorXd& theta) const {
    if (theta.size() != mean.size())
        throw std::invalid_argument("prior score: dimension mismatch");
    return (mean - theta).cwiseQuotient(variance);
}

Eigen::VectorXd GaussianPrior::draw(RngStream& rng) const {
    Eigen::VectorXd z = rng.normal_vector(mean.size());
    return mean + variance.cwiseSqrt().cwiseProduct(z);
}

Eigen::MatrixXd draw_latents(const GenerativeModel& model, int count,
                             RngStream& rng) {
    if (count < 1) throw std::invalid_argument("draw_latents: count must be >= 1");
    return model.latent_kind() == LatentKind::uniform_unit
               ? rng.uniform_matrix(count, model.latent_dim())
               : rng.normal_matrix(count, model.latent_dim());
}

OutputBatch simulate_outputs(const GenerativeModel& model,
                             const Eigen::MatrixXd& particles,
                             const Eigen::MatrixXd& latents) {
    if (particles.cols() != model.param_dim())
        throw std::invalid_argument("simulate_outputs: particle dim mismatch");
    if (latents.cols() != model.latent_dim())
        throw std::invalid_argument("simulate_outputs: latent dim mismatch");
    const Eigen::Index M = particles.rows(), J = latents.rows();
    OutputBatch out;
    out.by_seed.assign(static_cast<std::size_t>(J),
                       Eigen::MatrixXd(M, model.output_dim()));
    for (Eigen::Index j = 0; j < J; ++j)
        for (Eigen::Index m = 0; m < M; ++m)
            out.by_seed[static_cast<std::size_t>(j)].row(m) =
                model.simulate(particles.row(m), latents.row(j)).transpose();
    return out;
}

SampleBatch simulate_batch(const GenerativeModel& model,
                           const Eigen::VectorXd& theta,
                           const Eigen::MatrixXd& latents) {
    SampleBatch x(latents.rows(), model.output_dim());
    for (Eigen::Index j = 0; j < latents.rows(); ++j)
        x.row(j) = model.simulate(theta, latents.row(j)).transpose();
    return x;
}

Eigen::MatrixXd mmd_drift_g(const Eigen::MatrixXd& particles,
                            const OutputBatch& out, const SampleBatch& data,
                            const KernelSpec& spec, const EnsembleStats& stats,
                            Eigen::VectorXd* mmd_out, double data_term) {
    const Eigen::Index M = particles.rows(), D = particles.cols();
    const Eigen::Index J = out.seed_count(), N = out.output_dim();
    const Eigen::Index Nd = data.rows();
    if (J < 2) throw std::invalid_argument("mmd_drift_g: need >= 2 latent seeds");
    if (out.particle_count() != M)
        throw std::invalid_argument("mmd_drift_g: output/particle mismatch");
    if (data.cols() != N)
        throw std::invalid_argument("mmd_drift_g: data dimension mismatch");
    if (static_cast<Eigen::Index>(stats.cross.size()) != J)
        throw std::invalid_argument("mmd_drift_g: stats missing cross-covariances");

    const double g2 = spec.bandwidth * spec.bandwidth;
    const double w_sim = 2.0 / (static_cast<double>(J) * (J - 1));
    const double w_dat = 2.0 / (static_cast<double>(J) * Nd);

    Eigen::MatrixXd drift = Eigen::MatrixXd::Zero(M, D);
    if (mmd_out != nullptr) mmd_out->resize(M);

    const Eigen::VectorXd y2 = data.rowwise().squaredNorm();
    Eigen::MatrixXd sims(J, N);  // row j = x^{mj}
    Eigen::MatrixXd k_ss(J, J), k_sd(J, Nd), accum(J, N);
    Eigen::VectorXd g_m(D), s2(J), self_w(J);
    for (Eigen::Index m = 0; m < M; ++m) {
        for (Eigen::Index j = 0; j < J; ++j)
            sims.row(j) = out.by_seed[static_cast<std::size_t>(j)].row(m);
        s2 = sims.rowwise().squaredNorm();

        // Gram-trick squared distances (clamped against cancellation), one
        // vectorised exp per block; the j == l diagonal is excluded after.
        k_ss.noalias() = -2.0 * (sims * sims.transpose());
        k_ss.colwise() += s2;
        k_ss.rowwise() += s2.transpose();
        k_ss = (k_ss.cwiseMax(0.0) * (-0.5 / g2)).array().exp();
        k_ss.diagonal().setZero();

        k_sd.noalias() = -2.0 * (sims * data.transpose());
        k_sd.colwise() += s2;
        k_sd.rowwise() += y2.transpose();
        k_sd = (k_sd.cwiseMax(0.0) * (-0.5 / g2)).array().exp();

        // accum.row(j) = sum_{l != j} w_sim k(x^j,x^l) (x^j - x^l)
        //             -  sum_n       w_dat k(x^j,y^n) (x^j - y^n).
        self_w = w_sim * k_ss.rowwise().sum() - w_dat * k_sd.rowwise().sum();
        accum.noalias() = w_dat * (k_sd * data) - w_sim * (k_ss * sims);
        accum.array() += sims.array().colwise() * self_w.array();

        g_m.setZero();
        for (Eigen::Index j = 0; j < J; ++j) {
            // grad_x k = -(diff / gamma^2) k, folded in once per seed.
            g_m.noalias() -= stats.cross[static_cast<std::size_t>(j)] *
                             accum.row(j).transpose() / g2;
        }
        drift.row(m) = g_m.transpose();
        if (mmd_out != nullptr)
            (*mmd_out)[m] = k_ss.sum() / (static_cast<double>(J) * (J - 1)) +
                            data_term -
                            2.0 * k_sd.sum() / (static_cast<double>(J) * Nd);
    }
    return drift;
}

Eigen::VectorXd grad_mmd2_exact(const Eigen::VectorXd& theta,
                                const GenerativeModel& model,
                                const Eigen::MatrixXd& latents,
                                const SampleBatch& data, const KernelSpec& spec) {
    if (!model.has_jacobian())
        throw CapabilityError(model.name() +
                              ": exact MMD gradient needs a model Jacobian");
    check_data_for(model, data, "grad_mmd2_exact");
    const Eigen::Index J = latents.rows(), Nd = data.rows();
    if (J < 2)
        throw std::invalid_argument("grad_mmd2_exact: need >= 2 latent seeds");

    const double g2 = spec.bandwidth * spec.bandwidth;
    const double w_sim = 2.0 / (static_cast<double>(J) * (J - 1));
    const double w_dat = 2.0 / (static_cast<double>(J) * Nd);

    const SampleBatch x = simulate_batch(model, theta, latents);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(model.param_dim());
    Eigen::VectorXd accum(model.output_dim()), diff(model.output_dim());
    for (Eigen::Index j = 0; j < J; ++j) {
        accum.setZero();
        for (Eigen::Index l = 0; l < J; ++l) {
            if (l == j) continue;
            diff = (x.row(j) - x.row(l)).transpose();
            accum += (w_sim * std::exp(-diff.squaredNorm() / (2.0 * g2))) * diff;
        }
        for (Eigen::Index n = 0; n < Nd; ++n) {
            diff = (x.row(j) - data.row(n)).transpose();
            accum -= (w_dat * std::exp(-diff.squaredNorm() / (2.0 * g2))) * diff;
        }
        const Eigen::MatrixXd jac = model.jacobian(theta, latents.row(j));
        grad -= jac.transpose() * accum / g2;
    }
    return grad;
}

Eigen::MatrixXd aldi_correction(const Eigen::MatrixXd& particles) {
    const Eigen::Index M = particles.rows(), D = particles.cols();
    if (M < 2) throw std::invalid_argument("aldi_correction: need >= 2 particles");
    Eigen::MatrixXd dev = particles.rowwise() - particles.colwise().mean();
    return (static_cast<double>(D + 1) / static_cast<double>(M)) * dev;
}

namespace {

Eigen::MatrixXd etld_step(const Eigen::MatrixXd& particles,
                          const SampleBatch& data, const GenerativeModel& model,
                          const PriorScore& prior, const KernelSpec& spec,
                          const SamplerConfig& cfg, int step_index,
                          StepDiag* diag, Algorithm alg) {
    cfg.validate();
    check_data_for(model, data, "etld_step");
    const Eigen::Index M = particles.rows(), D = particles.cols();
    if (M != cfg.particle_count)
        throw std::invalid_argument("etld_step: ensemble size disagrees with config");
    if (D != model.param_dim())
        throw std::invalid_argument("etld_step: particle dim disagrees with model");
    if (!particles.allFinite())
        throw DivergenceError("etld_step: non-finite ensemble entering step " +
                                  std::to_string(step_index),
                              step_index);

    const bool need_mmd = cfg.beta != 0.0;
    Eigen::MatrixXd latents;
    OutputBatch out;
    if (need_mmd) {
        const std::uint64_t latent_step =
            cfg.latent_policy == LatentPolicy::frozen
                ? 0
                : static_cast<std::uint64_t>(step_index);
        RngStream ls(derive_seed(cfg.seed, Role::latent, latent_step));
        latents = draw_latents(model, cfg.sims_per_particle, ls);
        out = simulate_outputs(model, particles, latents);
    }
    const EnsembleStats stats = compute_stats(particles, need_mmd ? &out : nullptr);

    Eigen::MatrixXd mmd_term = Eigen::MatrixXd::Zero(M, D);
    if (need_mmd) {
        if (alg == Algorithm::gradient_free) {
            Eigen::VectorXd per_particle;
            const bool want_diag = diag != nullptr;
            mmd_term = cfg.beta * mmd_drift_g(particles, out, data, spec, stats,
                                              want_diag ? &per_particle : nullptr,
                                              want_diag ? diag->data_term : 0.0);
            if (want_diag) {
                diag->mean_mmd2 = per_particle.mean();
                diag->computed = true;
            }
        } else {
            for (Eigen::Index m = 0; m < M; ++m) {
                const Eigen::VectorXd grad = grad_mmd2_exact(
                    particles.row(m).transpose(), model, latents, data, spec);
                mmd_term.row(m) = cfg.beta * (stats.cov * grad).transpose();
            }
        }
    }

    Eigen::MatrixXd c_prior = stats.cov;
    if (cfg.jitter > 0.0)
        c_prior += cfg.jitter * Eigen::MatrixXd::Identity(D, D);

    Eigen::MatrixXd sym_root;
    if (cfg.noise_root == NoiseRoot::symmetric) sym_root = symmetric_sqrt(c_prior);

    const double ds = cfg.step_size;
    const double noise_scale = std::sqrt(2.0 * ds);
    Eigen::MatrixXd next(M, D);
    for (Eigen::Index m = 0; m < M; ++m) {
        const Eigen::VectorXd theta = particles.row(m).transpose();
        Eigen::VectorXd drift = c_prior * prior.score(theta);
        drift -= mmd_term.row(m).transpose();
        drift += (static_cast<double>(D + 1) / static_cast<double>(M)) *
                 (theta - stats.mean);

        RngStream ns(derive_seed(cfg.seed, Role::noise,
                                 static_cast<std::uint64_t>(step_index),
                                 static_cast<std::uint64_t>(m)));
        Eigen::VectorXd kick =
            cfg.noise_root == NoiseRoot::generalized
                ? Eigen::VectorXd(stats.sqrt * ns.normal_vector(M))
                : Eigen::VectorXd(sym_root * ns.normal_vector(D));
        next.row(m) = (theta + ds * drift + noise_scale * kick).transpose();
    }
    if (!next.allFinite())
        throw DivergenceError("etld_step: non-finite ensemble after step " +
                                  std::to_string(step_index),
                              step_index);
    return next;
}

}  // namespace

Eigen::MatrixXd gf_etld_step(const Eigen::MatrixXd& particles,
                             const SampleBatch& data, const GenerativeModel& model,
                             const PriorScore& prior, const KernelSpec& spec,
                             const SamplerConfig& cfg, int step_index,
                             StepDiag* diag) {
    return etld_step(particles, data, model, prior, spec, cfg, step_index, diag,
                     Algorithm::gradient_free);
}

Eigen::MatrixXd gradient_etld_step(const Eigen::MatrixXd& particles,
                                   const SampleBatch& data,
                                   const GenerativeModel& model,
                                   const PriorScore& prior, const KernelSpec& spec,
                                   const SamplerConfig& cfg, int step_index,
                                   StepDiag* diag) {
    return etld_step(particles, data, model, prior, spec, cfg, step_index, diag,
                     Algorithm::gradient);
}

ChainResult run_chain(const GenerativeModel& model, const SampleBatch& data,
                      const GaussianPrior& prior, const KernelSpec& spec,
                      const SamplerConfig& cfg) {
    cfg.validate();
    check_data_for(model, data, "run_chain");
    if (prior.dim() != model.param_dim())
        throw std::invalid_argument("run_chain: prior dim disagrees with model");

    RngStream init(derive_seed(cfg.seed, Role::init));
    Eigen::MatrixXd particles(cfg.particle_count, model.param_dim());
    for (Eigen::Index m = 0; m < particles.rows(); ++m)
        particles.row(m) = prior.draw(init).transpose();

    // Data-data term of the U-statistic, defined as 0 for a single row.
    double data_term = 0.0;
    if (data.rows() >= 2) {
        const double g2 = spec.bandwidth * spec.bandwidth;
        long double s = 0.0L;
        for (Eigen::Index a = 0; a < data.rows(); ++a)
            for (Eigen::Index b = 0; b < data.rows(); ++b)
                if (b != a)
                    s += std::exp(-(data.row(a) - data.row(b)).squaredNorm() /
                                  (2.0 * g2));
        data_term = static_cast<double>(
            s / (static_cast<long double>(data.rows()) * (data.rows() - 1)));
    }

    ChainResult res;
    std::vector<Eigen::VectorXd> kept_means;
    std::vector<Eigen::MatrixXd> kept_covs;
    for (int s = 0; s < cfg.n_steps; ++s) {
        StepDiag diag;
        diag.data_term = data_term;
        const bool want_diag =
            cfg.diag_interval > 0 && (s % cfg.diag_interval == 0) && cfg.beta != 0.0;
        particles = etld_step(particles, data, model, prior, spec, cfg, s,
                              want_diag ? &diag : nullptr, cfg.algorithm);
        res.steps_completed = s + 1;
        if (want_diag && diag.computed) {
            res.diag_steps.push_back(s);
            res.diag_mean_mmd2.push_back(diag.mean_mmd2);
        }
        const bool keep = cfg.thin > 0 && ((s + 1) % cfg.thin == 0);
        if (keep) {
            res.trajectory_steps.push_back(s + 1);
            res.trajectory.push_back(particles);
        }
        if (cfg.average_trajectory && keep && s + 1 > cfg.burn_in) {
            kept_means.push_back(ensemble_mean(particles));
            kept_covs.push_back(ensemble_covariance(particles));
        }
    }

    res.final_particles = particles;
    if (cfg.average_trajectory && !kept_means.empty()) {
        Eigen::VectorXd msum = Eigen::VectorXd::Zero(particles.cols());
        Eigen::MatrixXd csum =
            Eigen::MatrixXd::Zero(particles.cols(), particles.cols());
        for (const auto& v : kept_means) msum += v;
        for (const auto& c : kept_covs) csum += c;
        res.posterior_mean = msum / static_cast<double>(kept_means.size());
        res.posterior_cov = csum / static_cast<double>(kept_covs.size());
    } else {
        res.posterior_mean = ensemble_mean(particles);
        res.posterior_cov = ensemble_covariance(particles);
    }
    return res;
}

Eigen::VectorXd minimum_mmd_estimate(const GenerativeModel& model,
                                     const SampleBatch& data,
                                     const Eigen::VectorXd& theta0, double step,
                                     int iters, const KernelSpec& spec,
                                     const Eigen::MatrixXd& latents,
                                     double* objective_out) {
    if (!model.has_jacobian())
        throw CapabilityError(model.name() +
                              ": minimum-MMD estimate needs a model Jacobian");
    check_data_for(model, data, "minimum_mmd_estimate");
    if (!(step >= 0.0) || !std::isfinite(step))
        throw std::invalid_argument("minimum_mmd_estimate: bad step size");
    if (iters < 0)
        throw std::invalid_argument("minimum_mmd_estimate: negative iteration count");
    if (latents.rows() < 2)
        throw std::invalid_argument("minimum_mmd_estimate: need >= 2 latent seeds");

    Eigen::VectorXd theta = theta0;
    for (int it = 0; it < iters; ++it) {
        theta -= step * grad_mmd2_exact(theta, model, latents, data, spec);
        if (!theta.allFinite())
            throw DivergenceError("minimum_mmd_estimate: diverged at iteration " +
                                      std::to_string(it),
                                  it);
    }
    if (objective_out != nullptr) {
        *objective_out = data.rows() >= 2
                             ? mmd2_unbiased(simulate_batch(model, theta, latents),
                                             data, spec)
                             : std::numeric_limits<double>::quiet_NaN();
    }
    return theta;
}

}  // namespace gfetld
