#include <doctest.h>

#include "support.hpp"

#include <spillover/econometrics.hpp>

#include <cmath>

using namespace spillover;
namespace ec = spillover::econometrics;

namespace {

double oracle_pearson(const Vector& x, const Vector& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (Index i = 0; i < x.size(); ++i) {
    sx += x(i);
    sy += y(i);
    sxx += x(i) * x(i);
    syy += y(i) * y(i);
    sxy += x(i) * y(i);
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

// Rook contiguity on a side x side lattice.
std::vector<std::vector<std::size_t>> lattice(int side) {
  std::vector<std::vector<std::size_t>> adj(static_cast<std::size_t>(side * side));
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const auto i = static_cast<std::size_t>(r * side + c);
      if (r > 0) adj[i].push_back(i - static_cast<std::size_t>(side));
      if (r + 1 < side) adj[i].push_back(i + static_cast<std::size_t>(side));
      if (c > 0) adj[i].push_back(i - 1);
      if (c + 1 < side) adj[i].push_back(i + 1);
    }
  }
  return adj;
}

geo::Points lattice_points(int side) {
  geo::Points p(side * side, 2);
  for (int i = 0; i < side * side; ++i) {
    p(i, 0) = i % side;
    p(i, 1) = i / side;
  }
  return p;
}

}  // namespace

TEST_SUITE("ols") {
  TEST_CASE("matches normal equations on random designs") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
      const Index n = 50 + trial, k = 1 + trial % 6;
      const Matrix x = testing_support::random_matrix(rng, n, k);
      const Vector y = testing_support::random_vector(rng, n);
      const auto fit = ec::fit_ols(y, x);
      const Matrix design = testing_support::with_intercept(x);
      const Vector beta = testing_support::normal_equations(y, design);
      CHECK((fit.coefficients - beta).cwiseAbs().maxCoeff() <= 1e-8);
      CHECK((design.transpose() * fit.residuals).cwiseAbs().maxCoeff() <= 1e-9);

      const Vector e = y - design * beta;
      const double rss = e.squaredNorm(), nn = static_cast<double>(n);
      const double sigma2 = rss / static_cast<double>(n - k - 1);
      const Matrix cov = sigma2 * (design.transpose() * design).inverse();
      CHECK((fit.covariance - cov).cwiseAbs().maxCoeff() <= 1e-10);
      const double logl = -0.5 * nn * (std::log(2.0 * M_PI * rss / nn) + 1.0);
      CHECK(fit.log_likelihood == doctest::Approx(logl).epsilon(1e-10));
      CHECK(fit.aic == doctest::Approx(2.0 * static_cast<double>(k + 1) - 2.0 * logl).epsilon(1e-10));
      const double tss = (y.array() - y.mean()).square().sum();
      CHECK(fit.r_squared == doctest::Approx(1.0 - rss / tss).epsilon(1e-10));
      CHECK(fit.adjusted_r_squared ==
            doctest::Approx(1.0 - (rss / static_cast<double>(n - k - 1)) / (tss / (nn - 1.0))).epsilon(1e-10));
    }
  }

  TEST_CASE("exact line and intercept-only") {
    Matrix x(5, 1);
    x << 1, 2, 3, 4, 5;
    const Vector y = 2.0 * x.col(0);
    const auto fit = ec::fit_ols(y, x, {"x"});
    CHECK(fit.coefficients(1) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(std::abs(fit.coefficients(0)) <= 1e-12);
    CHECK(fit.names == std::vector<std::string>{"const", "x"});

    Vector z(4);
    z << 1, 2, 3, 6;
    const auto mean_only = ec::fit_ols(z, Matrix(4, 0));
    CHECK(mean_only.coefficients(0) == doctest::Approx(3.0).epsilon(1e-12));
  }

  TEST_CASE("collinear and short designs throw") {
    Matrix x(6, 2);
    x << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10, 6, 12;
    CHECK_THROWS_AS(ec::fit_ols(Vector::Ones(6), x), RankDeficient);
    CHECK_THROWS_AS(ec::fit_ols(Vector::Ones(2), Matrix::Ones(2, 1)), InvalidArgument);
  }
}

TEST_SUITE("correlation and vif") {
  TEST_CASE("pearson r and its p-value") {
    std::mt19937_64 rng(4);
    const Vector x = testing_support::random_vector(rng, 40);
    const Vector y = 0.5 * x + testing_support::random_vector(rng, 40);
    CHECK(ec::pearson_correlation(x, y).r == doctest::Approx(oracle_pearson(x, y)).epsilon(1e-12));

    // n = 4: two degrees of freedom, where the two-sided t tail is 1 - t / sqrt(t^2 + 2).
    Vector a(4), b(4);
    a << 1, 2, 3, 4;
    b << 2, 1, 4, 3;
    const auto c = ec::pearson_correlation(a, b);
    CHECK(c.r == doctest::Approx(0.6).epsilon(1e-12));
    const double t = 0.6 * std::sqrt(2.0 / (1.0 - 0.36));
    CHECK(c.p_value == doctest::Approx(1.0 - t / std::sqrt(t * t + 2.0)).epsilon(1e-10));
  }

  TEST_CASE("vif for two regressors with r = 0.8") {
    Vector e1(4), e2(4);
    e1 << 0.5, -0.5, 0.5, -0.5;
    e2 << 0.5, 0.5, -0.5, -0.5;
    Matrix x(4, 2);
    x.col(0) = e1;
    x.col(1) = 0.8 * e1 + 0.6 * e2;
    const auto v = ec::vif(x);
    CHECK(v.vif(0) == doctest::Approx(1.0 / 0.36).epsilon(1e-10));
    CHECK(v.vif(1) == doctest::Approx(1.0 / 0.36).epsilon(1e-10));
    CHECK_FALSE(v.flagged[0]);
  }

  TEST_CASE("vif under exact collinearity is infinite") {
    Matrix x(5, 3);
    x << 1, 0, 1, 2, 1, 3, 3, 0, 3, 4, 1, 5, 5, 0, 5;
    const auto v = ec::vif(x);
    CHECK(std::isinf(v.vif(0)));
    CHECK(v.flagged[0]);
  }
}

TEST_SUITE("moran") {
  TEST_CASE("checkerboard on a rook lattice gives -1") {
    const int side = 6;
    const auto adj = lattice(side);
    const auto w = weights::build_weights(lattice_points(side), weights::Scheme::contiguity(), &adj);
    Vector x(side * side);
    for (int i = 0; i < side * side; ++i) x(i) = ((i % side) + (i / side)) % 2 == 0 ? 1.0 : -1.0;
    CHECK(ec::morans_i_statistic(x, w) == doctest::Approx(-1.0).epsilon(1e-14));
  }

  TEST_CASE("matches the literal double sum") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 10; ++trial) {
      const auto p = testing_support::random_points(rng, 40, 10.0);
      const Vector x = testing_support::random_vector(rng, 40);
      const auto w = weights::build_weights(p, weights::Scheme::inverse_distance());
      const double oracle = testing_support::moran_double_sum(x, testing_support::dense_inverse_distance(p, 1));
      CHECK(std::abs(ec::morans_i_statistic(x, w) - oracle) <= 1e-12);
    }
  }

  TEST_CASE("permutation test is reproducible and bounded") {
    std::mt19937_64 rng(10);
    const auto p = testing_support::random_points(rng, 50, 10.0);
    Vector x = p.col(0) + 0.1 * testing_support::random_vector(rng, 50);
    const auto w = weights::build_weights(p, weights::Scheme::inverse_distance());
    const auto a = ec::morans_i(x, w, 999, 42);
    const auto b = ec::morans_i(x, w, 999, 42);
    CHECK(a.p_value == b.p_value);
    CHECK(a.null_mean == b.null_mean);
    CHECK(a.p_value >= 1.0 / 1000.0);
    CHECK(a.p_value < 0.01);
    CHECK(a.expected == doctest::Approx(-1.0 / 49.0));
    CHECK_THROWS_AS(ec::morans_i(Vector::Ones(50), w), InvalidArgument);
  }
}

TEST_SUITE("slx") {
  TEST_CASE("recovers planted coefficients without noise") {
    std::mt19937_64 rng(12);
    const auto p = testing_support::random_points(rng, 80, 20.0);
    const auto w = weights::build_weights(p, weights::Scheme::inverse_distance());
    const Matrix x = testing_support::random_matrix(rng, 80, 1);
    const Vector wx = weights::spatial_lag_vector(w, x);
    const Vector y = (0.5 + 2.0 * x.col(0).array() - 3.0 * wx.array()).matrix();
    const auto slx = ec::fit_slx(y, x, w, {"x"});
    REQUIRE(slx.effects.size() == 1);
    const auto& e = slx.effects[0];
    CHECK(slx.fit.coefficients(0) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(e.direct == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(e.indirect == doctest::Approx(-3.0).epsilon(1e-9));
    CHECK(e.total == e.direct + e.indirect);
  }

  TEST_CASE("no spillover gives a zero indirect effect") {
    std::mt19937_64 rng(14);
    const auto p = testing_support::random_points(rng, 60, 20.0);
    const auto w = weights::build_weights(p, weights::Scheme::inverse_distance());
    const Matrix x = testing_support::random_matrix(rng, 60, 2);
    const Vector y = (1.0 + 2.0 * x.col(0).array() - x.col(1).array()).matrix();
    const auto slx = ec::fit_slx(y, x, w, {"a", "b"});
    for (const auto& e : slx.effects) CHECK(std::abs(e.indirect) <= 1e-9);
  }

  TEST_CASE("total effect standard error includes the covariance") {
    std::mt19937_64 rng(15);
    const auto p = testing_support::random_points(rng, 70, 20.0);
    const auto w = weights::build_weights(p, weights::Scheme::inverse_distance());
    const Matrix x = testing_support::random_matrix(rng, 70, 1);
    const Vector y = x.col(0) + testing_support::random_vector(rng, 70);
    const auto slx = ec::fit_slx(y, x, w, {"x"});
    const Matrix& c = slx.fit.covariance;
    CHECK(slx.effects[0].se_total == doctest::Approx(std::sqrt(c(1, 1) + c(2, 2) + 2.0 * c(1, 2))).epsilon(1e-12));
  }

  TEST_CASE("constant lag column is dropped") {
    geo::Points p(4, 2);
    p << 0, 0, 1, 0, 0, 1, 1, 1;
    const auto w = weights::build_weights(p, weights::Scheme::inverse_distance());
    Matrix x(4, 1);
    x << 1, 2, 3, 4;
    Matrix lag = Matrix::Constant(4, 1, 2.5);
    Vector y(4);
    y << 1, 3, 2, 5;
    const auto slx = ec::fit_slx_with_lags(y, x, lag, {"x"});
    CHECK(slx.effects[0].lag_dropped);
    CHECK(std::isnan(slx.effects[0].p_indirect));
    CHECK_FALSE(slx.warnings.empty());
  }
}

TEST_SUITE("stars") {
  TEST_CASE("strict thresholds") {
    CHECK(ec::significance_stars(0.04) == "**");
    CHECK(ec::significance_stars(0.009) == "***");
    CHECK(ec::significance_stars(0.01) == "**");
    CHECK(ec::significance_stars(0.10) == "");
    CHECK(ec::significance_stars(0.04, ec::StarConvention::strict) == "*");
    CHECK(ec::significance_stars(0.0005, ec::StarConvention::strict) == "***");
    CHECK(ec::parse_star_convention(ec::to_string(ec::StarConvention::strict)) == ec::StarConvention::strict);
  }
}
