#include <doctest.h>

#include <cmath>
#include <memory>
#include <stdexcept>

#include "gfetld/sampler.hpp"

using gfetld::Algorithm;
using gfetld::GaussianPrior;
using gfetld::KernelSpec;
using gfetld::LatentPolicy;
using gfetld::OutputBatch;
using gfetld::SampleBatch;
using gfetld::SamplerConfig;

namespace {

Eigen::VectorXd scalar(double v) {
    Eigen::VectorXd x(1);
    x << v;
    return x;
}

GaussianPrior prior1d(double mean, double var) {
    return GaussianPrior(scalar(mean), scalar(var));
}

// Wraps a model and counts Jacobian calls; used to prove the gradient-free
// path never touches the capability.
class JacobianCounter final : public gfetld::GenerativeModel {
  public:
    explicit JacobianCounter(std::unique_ptr<gfetld::GenerativeModel> inner)
        : inner_(std::move(inner)) {}
    std::string name() const override { return inner_->name(); }
    Eigen::Index param_dim() const override { return inner_->param_dim(); }
    Eigen::Index output_dim() const override { return inner_->output_dim(); }
    Eigen::Index latent_dim() const override { return inner_->latent_dim(); }
    gfetld::LatentKind latent_kind() const override { return inner_->latent_kind(); }
    Eigen::VectorXd simulate(const Eigen::VectorXd& theta,
                             const Eigen::VectorXd& u) const override {
        return inner_->simulate(theta, u);
    }
    bool has_jacobian() const override { return inner_->has_jacobian(); }
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& theta,
                             const Eigen::VectorXd& u) const override {
        ++calls;
        return inner_->jacobian(theta, u);
    }
    mutable long calls = 0;

  private:
    std::unique_ptr<gfetld::GenerativeModel> inner_;
};

}  // namespace

TEST_CASE("SamplerConfig validation") {
    SamplerConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.particle_count = 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = SamplerConfig{};
    cfg.sims_per_particle = 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = SamplerConfig{};
    cfg.step_size = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = SamplerConfig{};
    cfg.beta = -0.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = SamplerConfig{};
    cfg.beta = 0.0;  // prior-only chains are allowed
    CHECK_NOTHROW(cfg.validate());
    cfg = SamplerConfig{};
    cfg.n_steps = 0;
    CHECK_NOTHROW(cfg.validate());  // n_steps = 0 returns the prior draw
    cfg.n_steps = -1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("GaussianPrior score and draw moments") {
    GaussianPrior prior(scalar(2.0), scalar(4.0));
    CHECK(prior.score(scalar(2.0))(0) == doctest::Approx(0.0));
    CHECK(prior.score(scalar(6.0))(0) == doctest::Approx(-1.0));  // (2-6)/4
    CHECK_THROWS_AS(GaussianPrior(scalar(0.0), scalar(0.0)), std::invalid_argument);

    gfetld::RngStream rng(5);
    double sum = 0.0, sumsq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double v = prior.draw(rng)(0);
        sum += v;
        sumsq += v * v;
    }
    const double mean = sum / n;
    CHECK(std::abs(mean - 2.0) < 0.05);
    CHECK(std::abs(sumsq / n - mean * mean - 4.0) < 0.15);
}

TEST_CASE("draw_latents respects the model's latent law") {
    gfetld::RngStream rng(9);
    auto gauss = gfetld::make_model("gaussian_location");
    Eigen::MatrixXd un = gfetld::draw_latents(*gauss, 1000, rng);
    REQUIRE(un.rows() == 1000);
    REQUIRE(un.cols() == 1);
    CHECK(std::abs(un.mean()) < 0.12);

    auto unif = gfetld::make_model("uniform_location");
    Eigen::MatrixXd uu = gfetld::draw_latents(*unif, 1000, rng);
    CHECK(uu.minCoeff() >= 0.0);
    CHECK(uu.maxCoeff() <= 1.0);
    CHECK(std::abs(uu.mean() - 0.5) < 0.05);
}

TEST_CASE("mmd_drift_g vanishes on a collapsed ensemble") {
    auto model = gfetld::make_model("gaussian_location");
    gfetld::RngStream rng(33);
    Eigen::MatrixXd particles = Eigen::MatrixXd::Constant(6, 1, 1.7);
    Eigen::MatrixXd latents = gfetld::draw_latents(*model, 4, rng);
    OutputBatch out = gfetld::simulate_outputs(*model, particles, latents);
    SampleBatch data = rng.normal_matrix(9, 1);
    gfetld::EnsembleStats stats = gfetld::compute_stats(particles, &out);
    Eigen::MatrixXd g = gfetld::mmd_drift_g(particles, out, data, KernelSpec{1.0}, stats);
    CHECK(g.norm() == 0.0);
}

TEST_CASE("mmd_drift_g equals C grad MMD^2 for the linear model") {
    auto model = gfetld::make_model("gaussian_location");
    gfetld::RngStream rng(41);
    Eigen::MatrixXd particles = rng.normal_matrix(8, 1);
    Eigen::MatrixXd latents = gfetld::draw_latents(*model, 6, rng);
    OutputBatch out = gfetld::simulate_outputs(*model, particles, latents);
    SampleBatch data = rng.normal_matrix(7, 1);
    data.array() += 0.4;
    gfetld::EnsembleStats stats = gfetld::compute_stats(particles, &out);
    const KernelSpec spec{0.9};

    // Data-data term of the U-statistic (particle-independent).
    double dd = 0.0;
    for (int n = 0; n < 7; ++n)
        for (int m = 0; m < 7; ++m)
            if (m != n)
                dd += std::exp(-(data(n, 0) - data(m, 0)) * (data(n, 0) - data(m, 0)) /
                               (2.0 * spec.bandwidth * spec.bandwidth));
    dd /= 7.0 * 6.0;

    Eigen::VectorXd mmd(8);
    Eigen::MatrixXd g = gfetld::mmd_drift_g(particles, out, data, spec, stats, &mmd, dd);

    for (int m = 0; m < 8; ++m) {
        Eigen::VectorXd grad = gfetld::grad_mmd2_exact(particles.row(m).transpose(), *model,
                                                       latents, data, spec);
        Eigen::VectorXd expected = stats.cov * grad;
        CHECK(std::abs(g(m, 0) - expected(0)) <= 1e-10 * std::max(1.0, std::abs(expected(0))));

        // The per-particle MMD^2 diagnostic must equal the U-statistic computed
        // on this particle's simulations.
        SampleBatch sims(6, 1);
        for (int j = 0; j < 6; ++j) sims(j, 0) = out.by_seed[j](m, 0);
        CHECK(mmd(m) == doctest::Approx(gfetld::mmd2_unbiased(sims, data, spec)).epsilon(1e-10));
    }
}

TEST_CASE("grad_mmd2_exact matches finite differences and stationarity") {
    const KernelSpec spec{0.8};
    gfetld::RngStream rng(47);

    auto check_fd = [&](const gfetld::GenerativeModel& model, double theta_v,
                        const Eigen::MatrixXd& latents, const SampleBatch& data) {
        Eigen::VectorXd theta = scalar(theta_v);
        Eigen::VectorXd grad = gfetld::grad_mmd2_exact(theta, model, latents, data, spec);
        const double h = 1e-6;
        auto obj = [&](double t) {
            SampleBatch sims = gfetld::simulate_batch(model, scalar(t), latents);
            return gfetld::mmd2_unbiased(sims, data, spec);
        };
        const double fd = (obj(theta_v + h) - obj(theta_v - h)) / (2.0 * h);
        CHECK(std::abs(grad(0) - fd) <= 1e-6);
    };

    auto gauss = gfetld::make_model("gaussian_location");
    Eigen::MatrixXd lat_g = gfetld::draw_latents(*gauss, 5, rng);
    SampleBatch data = rng.normal_matrix(7, 1);
    for (double t : {-1.0, 0.0, 0.7, 2.0}) check_fd(*gauss, t, lat_g, data);

    auto unif = gfetld::make_model("uniform_location");
    Eigen::MatrixXd lat_u = gfetld::draw_latents(*unif, 5, rng);
    for (double t : {-0.5, 0.3, 1.5}) check_fd(*unif, t, lat_u, data);

    // Stationarity at the symmetric minimizer: data and latent cloud both
    // symmetric about 0 -> gradient at theta = 0 vanishes.
    Eigen::MatrixXd lat_sym(4, 1);
    lat_sym << -1.0, -0.3, 0.3, 1.0;
    SampleBatch data_sym(4, 1);
    data_sym << -0.9, -0.2, 0.2, 0.9;
    Eigen::VectorXd g0 = gfetld::grad_mmd2_exact(scalar(0.0), *gauss, lat_sym, data_sym, spec);
    CHECK(std::abs(g0(0)) < 1e-8);

    auto l96 = gfetld::make_model("lorenz96_stochastic");
    Eigen::MatrixXd lat_l = Eigen::MatrixXd::Zero(2, l96->latent_dim());
    SampleBatch fake = Eigen::MatrixXd::Zero(2, l96->output_dim());
    CHECK_THROWS_AS((void)gfetld::grad_mmd2_exact(Eigen::VectorXd::Zero(4), *l96, lat_l,
                                                  fake, spec),
                    gfetld::CapabilityError);
}

TEST_CASE("aldi_correction scaling") {
    gfetld::RngStream rng(51);
    Eigen::MatrixXd base = rng.normal_matrix(10, 2);
    Eigen::MatrixXd corr = gfetld::aldi_correction(base);
    REQUIRE(corr.rows() == 10);
    REQUIRE(corr.cols() == 2);

    Eigen::VectorXd mean = gfetld::ensemble_mean(base);
    for (int m = 0; m < 10; ++m) {
        Eigen::VectorXd expected =
            (3.0 / 10.0) * (base.row(m).transpose() - mean);  // (D+1)/M = 3/10
        CHECK((corr.row(m).transpose() - expected).norm() <= 1e-14);
    }

    // Same shape at 2M particles (duplicated ensemble): per-particle correction
    // halves when M doubles.
    Eigen::MatrixXd doubled(20, 2);
    doubled << base, base;
    Eigen::MatrixXd corr2 = gfetld::aldi_correction(doubled);
    for (int m = 0; m < 10; ++m) {
        CHECK((corr2.row(m) - 0.5 * corr.row(m)).norm() <= 1e-13);
    }
}

TEST_CASE("gf_etld_step: degenerate fixed point at beta = 0") {
    auto model = gfetld::make_model("gaussian_location");
    GaussianPrior prior = prior1d(1.5, 2.0);
    SamplerConfig cfg;
    cfg.particle_count = 5;
    cfg.sims_per_particle = 3;
    cfg.beta = 0.0;
    Eigen::MatrixXd particles = Eigen::MatrixXd::Constant(5, 1, 1.5);
    SampleBatch data = Eigen::MatrixXd::Zero(4, 1);
    Eigen::MatrixXd next =
        gfetld::gf_etld_step(particles, data, *model, prior, KernelSpec{1.0}, cfg, 0);
    // Zero spread -> zero covariance -> zero drift and zero diffusion.
    CHECK((next - particles).norm() == 0.0);
}

TEST_CASE("gf_etld_step is deterministic") {
    auto model = gfetld::make_model("gaussian_location");
    GaussianPrior prior = prior1d(0.0, 1.0);
    SamplerConfig cfg;
    cfg.particle_count = 6;
    cfg.sims_per_particle = 4;
    cfg.seed = 77;
    gfetld::RngStream rng(88);
    Eigen::MatrixXd particles = rng.normal_matrix(6, 1);
    SampleBatch data = rng.normal_matrix(5, 1);
    Eigen::MatrixXd a =
        gfetld::gf_etld_step(particles, data, *model, prior, KernelSpec{1.0}, cfg, 3);
    Eigen::MatrixXd b =
        gfetld::gf_etld_step(particles, data, *model, prior, KernelSpec{1.0}, cfg, 3);
    CHECK((a - b).norm() == 0.0);  // bit-identical

    // A different step index reseeds latents and noise.
    Eigen::MatrixXd c =
        gfetld::gf_etld_step(particles, data, *model, prior, KernelSpec{1.0}, cfg, 4);
    CHECK((a - c).norm() > 0.0);
}

TEST_CASE("gradient-free and gradient steps agree on the linear model") {
    auto model = gfetld::make_model("gaussian_location");
    GaussianPrior prior = prior1d(2.0, 1.0);
    SamplerConfig cfg;
    cfg.particle_count = 10;
    cfg.sims_per_particle = 10;
    cfg.step_size = 1e-3;
    cfg.beta = 5.0;
    cfg.seed = 1234;
    cfg.latent_policy = LatentPolicy::frozen;

    gfetld::RngStream rng(4321);
    Eigen::MatrixXd gf = rng.normal_matrix(10, 1);
    gf.array() += 2.0;
    Eigen::MatrixXd gr = gf;
    SampleBatch data = rng.normal_matrix(30, 1);

    for (int step = 0; step < 50; ++step) {
        gf = gfetld::gf_etld_step(gf, data, *model, prior, KernelSpec{1.0}, cfg, step);
        gr = gfetld::gradient_etld_step(gr, data, *model, prior, KernelSpec{1.0}, cfg, step);
        REQUIRE(gf.allFinite());
        const double scale = std::max(1.0, gf.norm());
        REQUIRE((gf - gr).norm() <= 1e-8 * scale);
    }
}

TEST_CASE("gradient_etld_step requires the Jacobian capability") {
    auto l96 = gfetld::make_model("lorenz96_stochastic");
    GaussianPrior prior(Eigen::VectorXd::Zero(4), Eigen::VectorXd::Ones(4));
    SamplerConfig cfg;
    cfg.particle_count = 3;
    cfg.sims_per_particle = 2;
    gfetld::RngStream rng(3);
    Eigen::MatrixXd particles = rng.normal_matrix(3, 4);
    SampleBatch data = Eigen::MatrixXd::Zero(2, l96->output_dim());
    CHECK_THROWS_AS((void)gfetld::gradient_etld_step(particles, data, *l96, prior,
                                                     KernelSpec{1.0}, cfg, 0),
                    gfetld::CapabilityError);
}

TEST_CASE("gf_etld_step never calls the Jacobian") {
    JacobianCounter counting(gfetld::make_model("gaussian_location"));
    GaussianPrior prior = prior1d(0.0, 1.0);
    SamplerConfig cfg;
    cfg.particle_count = 8;
    cfg.sims_per_particle = 5;
    cfg.beta = 3.0;
    gfetld::RngStream rng(14);
    Eigen::MatrixXd particles = rng.normal_matrix(8, 1);
    SampleBatch data = rng.normal_matrix(12, 1);
    for (int step = 0; step < 5; ++step)
        particles = gfetld::gf_etld_step(particles, data, counting, prior, KernelSpec{1.0},
                                         cfg, step);
    CHECK(counting.calls == 0);

    (void)gfetld::gradient_etld_step(particles, data, counting, prior, KernelSpec{1.0}, cfg, 0);
    CHECK(counting.calls > 0);
}

TEST_CASE("run_chain: n_steps = 0, determinism, diagnostics, trajectory") {
    auto model = gfetld::make_model("gaussian_location");
    GaussianPrior prior = prior1d(1.0, 0.5);
    gfetld::RngStream rng(21);
    SampleBatch data = rng.normal_matrix(20, 1);

    SamplerConfig cfg;
    cfg.particle_count = 40;
    cfg.sims_per_particle = 4;
    cfg.n_steps = 0;
    cfg.seed = 99;
    gfetld::ChainResult r0 = gfetld::run_chain(*model, data, prior, KernelSpec{1.0}, cfg);
    CHECK(r0.steps_completed == 0);
    CHECK(std::abs(r0.posterior_mean(0) - 1.0) < 3.0 * std::sqrt(0.5 / 40.0) + 0.2);

    cfg.n_steps = 25;
    cfg.thin = 10;
    cfg.diag_interval = 5;
    gfetld::ChainResult a = gfetld::run_chain(*model, data, prior, KernelSpec{1.0}, cfg);
    gfetld::ChainResult b = gfetld::run_chain(*model, data, prior, KernelSpec{1.0}, cfg);
    CHECK((a.final_particles - b.final_particles).norm() == 0.0);
    CHECK(a.posterior_mean == b.posterior_mean);
    REQUIRE(a.diag_steps.size() == a.diag_mean_mmd2.size());
    CHECK(a.diag_steps.size() == 5);  // steps 0, 5, 10, 15, 20
    REQUIRE(!a.trajectory.empty());
    CHECK(a.trajectory_steps.size() == a.trajectory.size());
    CHECK(a.trajectory_steps.back() == 20);

    // Different seed -> different draw.
    cfg.seed = 100;
    gfetld::ChainResult c = gfetld::run_chain(*model, data, prior, KernelSpec{1.0}, cfg);
    CHECK((a.final_particles - c.final_particles).norm() > 0.0);
}

TEST_CASE("run_chain prior recovery with beta = 0") {
    auto model = gfetld::make_model("gaussian_location");
    const double mu = 2.0, var = 1.0;
    GaussianPrior prior = prior1d(mu, var);
    gfetld::RngStream rng(31);
    SampleBatch data = rng.normal_matrix(10, 1);

    SamplerConfig cfg;
    cfg.particle_count = 200;
    cfg.sims_per_particle = 2;
    cfg.beta = 0.0;
    cfg.step_size = 2e-3;
    cfg.n_steps = 3000;
    cfg.seed = 7;
    gfetld::ChainResult r = gfetld::run_chain(*model, data, prior, KernelSpec{1.0}, cfg);
    CHECK(std::abs(r.posterior_mean(0) - mu) <= 3.0 * std::sqrt(var / 200.0));
    CHECK(r.posterior_cov(0, 0) > 0.7 * var);
    CHECK(r.posterior_cov(0, 0) < 1.3 * var);
}

TEST_CASE("run_chain small posterior recovery and average_trajectory") {
    auto model = gfetld::make_model("gaussian_location");
    GaussianPrior prior = prior1d(2.0, 1.0);
    gfetld::RngStream drng(gfetld::derive_seed(5, gfetld::Role::data));
    SampleBatch data(30, 1);
    for (int i = 0; i < 30; ++i) data(i, 0) = drng.normal();  // centered at 0

    SamplerConfig cfg;
    cfg.particle_count = 10;
    cfg.sims_per_particle = 20;
    cfg.step_size = 1e-3;
    cfg.beta = 200.0;
    cfg.n_steps = 1500;
    cfg.seed = 11;
    cfg.burn_in = 500;
    cfg.thin = 5;
    cfg.average_trajectory = true;
    gfetld::ChainResult r = gfetld::run_chain(*model, data, prior, KernelSpec{1.0}, cfg);
    CHECK(std::abs(r.posterior_mean(0)) < 0.5);
}

TEST_CASE("minimum_mmd_estimate against a frozen-seed grid search") {
    auto model = gfetld::make_model("gaussian_location");
    gfetld::RngStream rng(61);
    SampleBatch data = rng.normal_matrix(40, 1);  // centered near 0
    Eigen::MatrixXd latents = gfetld::draw_latents(*model, 30, rng);
    const KernelSpec spec{1.0};

    auto objective = [&](double t) {
        SampleBatch sims = gfetld::simulate_batch(*model, scalar(t), latents);
        return gfetld::mmd2_unbiased(sims, data, spec);
    };
    double best_t = 0.0, best_v = 1e100;
    for (int i = 0; i <= 200; ++i) {
        const double t = -1.0 + 2.0 * i / 200.0;
        const double v = objective(t);
        if (v < best_v) {
            best_v = v;
            best_t = t;
        }
    }

    double obj = 0.0;
    Eigen::VectorXd est =
        gfetld::minimum_mmd_estimate(*model, data, scalar(2.0), 0.5, 400, spec, latents, &obj);
    CHECK(std::abs(est(0) - best_t) < 0.2);
    CHECK(std::abs(est(0)) < 0.2);
    CHECK(obj == doctest::Approx(objective(est(0))).epsilon(1e-9));

    // step = 0 -> returns theta0 unchanged.
    Eigen::VectorXd frozen =
        gfetld::minimum_mmd_estimate(*model, data, scalar(2.0), 0.0, 50, spec, latents);
    CHECK(frozen(0) == 2.0);

    // Already-converged start barely moves.
    Eigen::VectorXd refine =
        gfetld::minimum_mmd_estimate(*model, data, scalar(best_t), 0.5, 100, spec, latents);
    CHECK(std::abs(refine(0) - best_t) < 0.05);
}

TEST_CASE("noise_root symmetric variant preserves prior recovery") {
    auto model = gfetld::make_model("gaussian_location");
    GaussianPrior prior = prior1d(-1.0, 0.25);
    gfetld::RngStream rng(71);
    SampleBatch data = rng.normal_matrix(5, 1);

    SamplerConfig cfg;
    cfg.particle_count = 150;
    cfg.sims_per_particle = 2;
    cfg.beta = 0.0;
    cfg.step_size = 2e-3;
    cfg.n_steps = 2000;
    cfg.noise_root = gfetld::NoiseRoot::symmetric;
    cfg.seed = 13;
    gfetld::ChainResult r = gfetld::run_chain(*model, data, prior, KernelSpec{1.0}, cfg);
    CHECK(std::abs(r.posterior_mean(0) + 1.0) <= 4.0 * std::sqrt(0.25 / 150.0));
    CHECK(r.posterior_cov(0, 0) > 0.7 * 0.25);
    CHECK(r.posterior_cov(0, 0) < 1.3 * 0.25);
}
