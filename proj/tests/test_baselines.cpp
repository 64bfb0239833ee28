#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gfetld/baselines.hpp"
#include "gfetld/rng.hpp"

using gfetld::GaussianPrior;
using gfetld::GridPosterior;
using gfetld::GridSpec;
using gfetld::SampleBatch;

namespace {

Eigen::VectorXd scalar(double v) {
    Eigen::VectorXd x(1);
    x << v;
    return x;
}

}  // namespace

TEST_CASE("conjugate_gaussian_posterior hand values") {
    SampleBatch empty(0, 1);
    auto prior_through = gfetld::conjugate_gaussian_posterior(2.0, 1.0, empty);
    CHECK(prior_through.mean == doctest::Approx(2.0));
    CHECK(prior_through.variance == doctest::Approx(1.0));

    SampleBatch one(1, 1);
    one << 0.0;
    auto p1 = gfetld::conjugate_gaussian_posterior(2.0, 1.0, one);
    CHECK(p1.mean == doctest::Approx(1.0));
    CHECK(p1.variance == doctest::Approx(0.5));

    SampleBatch zeros = Eigen::MatrixXd::Zero(150, 1);
    auto p150 = gfetld::conjugate_gaussian_posterior(2.0, 1.0, zeros);
    CHECK(p150.mean == doctest::Approx(2.0 / 151.0).epsilon(1e-12));
    CHECK(p150.variance == doctest::Approx(1.0 / 151.0).epsilon(1e-12));

    CHECK_THROWS_AS(
        (void)gfetld::conjugate_gaussian_posterior(0.0, 0.0, one),
        std::invalid_argument);
}

TEST_CASE("conjugate posterior matches a fine-grid numerical posterior") {
    gfetld::RngStream rng(101);
    for (int trial = 0; trial < 5; ++trial) {
        const double mu0 = rng.normal();
        const double var0 = 0.5 + rng.uniform01();
        const int n = 3 + int(rng.next_u64() % 20);
        SampleBatch data(n, 1);
        for (int i = 0; i < n; ++i) data(i, 0) = mu0 + 2.0 * rng.normal();

        auto lib = gfetld::conjugate_gaussian_posterior(mu0, var0, data);

        // Riemann-sum posterior on a fine grid over +-10 sd around the data.
        const int G = 200001;
        const double lo = lib.mean - 10.0, hi = lib.mean + 10.0;
        const double dx = (hi - lo) / (G - 1);
        long double z = 0.0L, m1 = 0.0L, m2 = 0.0L;
        for (int g = 0; g < G; ++g) {
            const double th = lo + g * dx;
            double lw = -(th - mu0) * (th - mu0) / (2.0 * var0);
            for (int i = 0; i < n; ++i)
                lw -= (data(i, 0) - th) * (data(i, 0) - th) / 2.0;
            const long double w = expl(lw);
            z += w;
            m1 += w * th;
            m2 += w * th * th;
        }
        const double mean = double(m1 / z);
        const double var = double(m2 / z) - mean * mean;
        CHECK(std::abs(lib.mean - mean) < 1e-4);
        CHECK(std::abs(lib.variance - var) < 1e-4);
    }
}

TEST_CASE("grid_posterior_uniform: symmetric single datum") {
    SampleBatch one(1, 1);
    one << 1.0;
    // Wide, nearly flat prior so the posterior is uniform on [0, 2].
    GaussianPrior prior(scalar(1.0), scalar(1e6));
    GridPosterior gp = gfetld::grid_posterior_uniform(one, prior);
    CHECK_FALSE(gp.degenerate);
    CHECK(gp.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(gp.mean() == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("grid_posterior_uniform: clean data concentrates near theta*") {
    gfetld::RngStream rng(7);
    const double theta_star = 1.0;
    SampleBatch data(200, 1);
    for (int i = 0; i < 200; ++i)
        data(i, 0) = theta_star + 2.0 * rng.uniform01() - 1.0;
    GaussianPrior prior(scalar(2.0), scalar(1.0));
    GridPosterior gp = gfetld::grid_posterior_uniform(data, prior);
    CHECK_FALSE(gp.degenerate);
    // Support interval [max-1, min+1] is narrow around theta*; the posterior
    // mean must land inside it.
    const double lo = data.maxCoeff() - 1.0, hi = data.minCoeff() + 1.0;
    CHECK(gp.mean() >= lo - 0.005);
    CHECK(gp.mean() <= hi + 0.005);
    CHECK(std::abs(gp.mean() - theta_star) < 0.1);
}

TEST_CASE("grid_posterior_uniform: contamination degenerates the support") {
    gfetld::RngStream rng(13);
    SampleBatch data(100, 1);
    for (int i = 0; i < 90; ++i) data(i, 0) = 1.0 + 2.0 * rng.uniform01() - 1.0;
    for (int i = 90; i < 100; ++i) data(i, 0) = 10.0 + rng.normal();
    GaussianPrior prior(scalar(2.0), scalar(1.0));
    GridPosterior gp = gfetld::grid_posterior_uniform(data, prior);
    CHECK(gp.degenerate);  // max(y)-1 > min(y)+1: empty intersection
    CHECK(gp.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));

    const double mid = gfetld::support_interval_midpoint(data);
    CHECK(mid == doctest::Approx(0.5 * (data.minCoeff() + data.maxCoeff())));
    // Outliers at 10 drag the midpoint far from theta* = 1.
    CHECK(mid > 4.0);
}

TEST_CASE("grid_posterior_uniform converges under grid refinement") {
    gfetld::RngStream rng(29);
    SampleBatch data(50, 1);
    for (int i = 0; i < 50; ++i) data(i, 0) = 0.3 + 2.0 * rng.uniform01() - 1.0;
    GaussianPrior prior(scalar(2.0), scalar(1.0));

    GridSpec coarse{-5.0, 12.0, 426};     // spacing 0.04
    GridSpec fine{-5.0, 12.0, 851};       // spacing 0.02
    GridSpec finer{-5.0, 12.0, 1701};     // spacing 0.01
    const double m_coarse = gfetld::grid_posterior_uniform(data, prior, 1.0, coarse).mean();
    const double m_fine = gfetld::grid_posterior_uniform(data, prior, 1.0, fine).mean();
    const double m_finer = gfetld::grid_posterior_uniform(data, prior, 1.0, finer).mean();
    CHECK(std::abs(m_fine - m_coarse) < 0.04);
    CHECK(std::abs(m_finer - m_fine) < 0.02);
}

TEST_CASE("rmse hand values and properties") {
    Eigen::VectorXd truth(2);
    truth << 1.0, -2.0;

    std::vector<Eigen::VectorXd> exact{truth, truth, truth};
    CHECK(gfetld::rmse(exact, truth).norm() == 0.0);

    Eigen::VectorXd off(2);
    off << 1.1, -2.1;
    std::vector<Eigen::VectorXd> single{off};
    Eigen::VectorXd r = gfetld::rmse(single, truth);
    CHECK(r(0) == doctest::Approx(0.1));
    CHECK(r(1) == doctest::Approx(0.1));

    std::vector<Eigen::VectorXd> two{scalar(0.3), scalar(-0.1)};
    Eigen::VectorXd r2 = gfetld::rmse(two, scalar(0.0));
    CHECK(r2(0) == doctest::Approx(std::sqrt(0.05)).epsilon(1e-12));

    std::vector<Eigen::VectorXd> swapped{scalar(-0.1), scalar(0.3)};
    CHECK(gfetld::rmse(swapped, scalar(0.0))(0) == doctest::Approx(r2(0)));

    std::vector<Eigen::VectorXd> none;
    CHECK_THROWS_AS((void)gfetld::rmse(none, truth), std::invalid_argument);
    std::vector<Eigen::VectorXd> bad{scalar(1.0)};
    CHECK_THROWS_AS((void)gfetld::rmse(bad, truth), std::invalid_argument);
}
