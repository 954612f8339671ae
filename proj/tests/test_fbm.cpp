#include "treeshadow/fbm.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace treeshadow;

namespace {
fbm::FbmSpec spec_for(double h, double horizon, int steps) {
    fbm::FbmSpec s;
    s.hurst = h;
    s.horizon = horizon;
    s.n_steps = steps;
    return s;
}
}  // namespace

TEST_CASE("covariance matches the Brownian case exactly at H = 1/2") {
    const auto grid = fbm::covariance(spec_for(0.5, 2.0, 2));  // times {1, 2}
    CHECK(grid.cov(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(grid.cov(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(grid.cov(1, 1) == doctest::Approx(2.0).epsilon(1e-15));

    const auto g = fbm::covariance(spec_for(0.5, 1.0, 16));
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j)
            CHECK(g.cov(i, j) ==
                  doctest::Approx(std::min(g.times[i], g.times[j])).epsilon(1e-14));
}

TEST_CASE("covariance diagonal is t^{2H} and R(1,2) = sqrt(2) for H = 0.75") {
    for (double h : {0.25, 0.6, 0.75, 0.9}) {
        const auto g = fbm::covariance(spec_for(h, 1.0, 8));
        for (int i = 0; i < 8; ++i)
            CHECK(g.cov(i, i) ==
                  doctest::Approx(std::pow(g.times[i], 2.0 * h)).epsilon(1e-14));
    }
    // half (1 + 2^{1.5} - 1) = 2^{0.5}, by direct evaluation
    const auto g = fbm::covariance(spec_for(0.75, 2.0, 2));
    CHECK(g.cov(0, 1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    CHECK(fbm::covariance_at(0.75, 1.0, 2.0) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("factorization reconstructs the covariance and spectra are near-PSD") {
    const auto g = fbm::covariance(spec_for(0.9, 1.0, 32));  // ill-conditioned end
    const Eigen::MatrixXd rec = g.factor * g.factor.transpose();
    const double scale = g.cov.cwiseAbs().maxCoeff();
    CHECK(((rec - g.cov).cwiseAbs().maxCoeff() / scale) <= 1e-10);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.cov);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * g.cov.diagonal().maxCoeff());
}

TEST_CASE("cholesky sampler: determinism, empty sets, variance oracle") {
    const auto g = fbm::covariance(spec_for(0.5, 1.0, 64));

    const auto empty = fbm::sample_cholesky(g, 0, 7);
    CHECK(empty.n_paths() == 0);

    const auto a = fbm::sample_cholesky(g, 257, 42);
    const auto b = fbm::sample_cholesky(g, 257, 42);
    CHECK(a.values == b.values);  // bit-identical
    const auto c = fbm::sample_cholesky(g, 257, 43);
    CHECK(a.values != c.values);

    // jobs must not change the sampled values
    const auto par = fbm::sample_cholesky(g, 257, 42, 4);
    CHECK(a.values == par.values);

    // Var(B_T) within 3 standard errors of T = 1
    const int n = 100000;
    const auto big = fbm::sample_cholesky(g, n, 2024);
    double s2 = 0.0, s4 = 0.0;
    for (int p = 0; p < n; ++p) {
        const double v = big.values(p, 63);
        s2 += v * v;
        s4 += v * v * v * v;
    }
    const double var = s2 / n;
    const double se = std::sqrt((s4 / n - var * var) / n);
    CHECK(std::abs(var - 1.0) <= 3.0 * se);
}

TEST_CASE("moving-average sampler is exactly Brownian at H = 1/2") {
    const auto disc = fbm::mvn_discrete_covariance(spec_for(0.5, 1.0, 8), 50.0, 20);
    const auto g = fbm::covariance(spec_for(0.5, 1.0, 8));
    CHECK((disc - g.cov).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("moving-average sampler is reproducible") {
    const auto s = spec_for(0.75, 1.0, 4);
    const auto a = fbm::sample_mvn(s, 10.0, 10, 1, 99);
    const auto b = fbm::sample_mvn(s, 10.0, 10, 1, 99);
    CHECK(a.values == b.values);
    CHECK(a.n_paths() == 1);
    CHECK_THROWS_AS(fbm::sample_mvn(s, -1.0, 10, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(fbm::sample_mvn(s, 10.0, 0, 1, 0), std::invalid_argument);
}

TEST_CASE("samplers agree in law: sample covariance within 3 MC standard errors") {
    for (double h : {0.25, 0.75}) {
        const auto s = spec_for(h, 1.0, 8);
        const auto g = fbm::covariance(s);
        const int n = 20000;
        const auto paths = fbm::sample_mvn(s, 50.0, 20, n, 7700 + int(100 * h), 2);
        for (int i = 0; i < s.n_steps; ++i) {
            for (int j = 0; j <= i; ++j) {
                double s1 = 0.0, sq = 0.0;
                for (int p = 0; p < n; ++p) {
                    const double prod = paths.values(p, i) * paths.values(p, j);
                    s1 += prod;
                    sq += prod * prod;
                }
                const double mean = s1 / n;
                const double se = std::sqrt(std::max(sq / n - mean * mean, 0.0) / n);
                CHECK(std::abs(mean - g.cov(i, j)) <= 3.0 * se);
            }
        }
    }
}

TEST_CASE("discrete law of the moving-average sampler is close enough for 1e5-path runs") {
    // bias of the construction itself, measured without sampling: must stay
    // well under one standard error of a 1e5-path covariance estimate
    for (double h : {0.25, 0.75}) {
        const auto s = spec_for(h, 1.0, 16);
        const auto g = fbm::covariance(s);
        const auto disc = fbm::mvn_discrete_covariance(s, 200.0, 20);
        double worst = 0.0;
        for (int i = 0; i < 16; ++i)
            for (int j = 0; j <= i; ++j) {
                const double se = std::sqrt(
                    (g.cov(i, i) * g.cov(j, j) + g.cov(i, j) * g.cov(i, j)) / 100000.0);
                worst = std::max(worst, std::abs(disc(i, j) - g.cov(i, j)) / se);
            }
        INFO("H = ", h, ", worst bias in standard errors = ", worst);
        CHECK(worst <= 1.0);
    }
}

TEST_CASE("conditional increments: Brownian case is history-independent") {
    const auto g = fbm::covariance(spec_for(0.5, 1.0, 8));
    const auto a = fbm::conditional_increment(g, {0.3, -0.2, 1.5});
    const auto b = fbm::conditional_increment(g, {-5.0, 2.0, 0.0});
    CHECK(a.mean == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(b.mean == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(a.stddev == doctest::Approx(std::sqrt(1.0 / 8.0)).epsilon(1e-12));
    CHECK(b.stddev == doctest::Approx(a.stddev).epsilon(1e-14));
}

TEST_CASE("conditional increments: hand-computed 2x2 Schur complement at H = 0.75") {
    const auto g = fbm::covariance(spec_for(0.75, 2.0, 2));  // times {1, 2}
    const auto m = fbm::conditional_increment(g, {1.0});
    // mean = (R(1,2)/R(1,1) - 1) * 1, std = sqrt(R(2,2) - R(1,2)^2/R(1,1) )
    CHECK(m.mean == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-12));
    CHECK(m.stddev ==
          doctest::Approx(std::sqrt(std::pow(2.0, 1.5) - 2.0)).epsilon(1e-12));

    const auto again = fbm::conditional_increment(g, {1.0});
    CHECK(again.mean == m.mean);
    CHECK(again.stddev == m.stddev);

    CHECK_THROWS_AS(fbm::conditional_increment(g, {}), std::invalid_argument);
    CHECK_THROWS_AS(fbm::conditional_increment(g, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("singular conditioning blocks are reported with the time indices") {
    fbm::GaussianGrid g;
    g.spec = spec_for(0.5, 1.0, 3);
    g.times = {1.0 / 3, 2.0 / 3, 1.0};
    g.cov = Eigen::MatrixXd::Constant(3, 3, 1.0);  // rank one, singular 2x2 block
    g.factor = Eigen::MatrixXd::Identity(3, 3);
    CHECK_THROWS_WITH_AS(fbm::conditional_increment(g, {0.1, 0.2}),
                         doctest::Contains("t_2"), std::runtime_error);
}

TEST_CASE("spec validation rejects out-of-range parameters") {
    CHECK_THROWS_AS(fbm::covariance(spec_for(0.0, 1.0, 4)), std::invalid_argument);
    CHECK_THROWS_AS(fbm::covariance(spec_for(1.0, 1.0, 4)), std::invalid_argument);
    CHECK_THROWS_AS(fbm::covariance(spec_for(0.5, 0.0, 4)), std::invalid_argument);
    CHECK_THROWS_AS(fbm::covariance(spec_for(0.5, 1.0, 0)), std::invalid_argument);
    fbm::FbmSpec bad = spec_for(0.5, 1.0, 4);
    bad.sigma = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("path export is deterministic csv with the agreed header") {
    const auto g = fbm::covariance(spec_for(0.5, 1.0, 2));
    const auto p = fbm::sample_cholesky(g, 2, 5);
    std::ostringstream a, b;
    fbm::export_csv(p, a);
    fbm::export_csv(p, b);
    CHECK(a.str() == b.str());
    CHECK(a.str().rfind("path_id,t,value\n", 0) == 0);
    CHECK(std::count(a.str().begin(), a.str().end(), '\n') == 5);  // header + 4 rows
}
