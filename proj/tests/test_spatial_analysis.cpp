#include <doctest.h>

#include "support.hpp"

#include <spillover/spatial_analysis.hpp>

#include <cmath>

using namespace spillover;
namespace sa = spillover::spatial_analysis;

namespace {

sa::ReachProfile constructed_profile() {
  sa::ReachProfile profile;
  profile.variables = {"nc"};
  const double d[] = {5, 10, 15, 20, 25};
  const double ind[] = {-1, -3, -2, -3, -0.5};
  const double p[] = {0.01, 0.2, 0.05, 0.08, 0.5};
  for (int i = 0; i < 5; ++i) {
    sa::ReachPoint pt;
    pt.distance = d[i];
    econometrics::Effect e;
    e.name = "nc";
    e.indirect = ind[i];
    e.p_indirect = p[i];
    pt.effects = {e};
    pt.log_likelihood = -static_cast<double>((i - 2) * (i - 2));
    profile.points.push_back(pt);
  }
  return profile;
}

}  // namespace

TEST_SUITE("reach") {
  TEST_CASE("threshold grid") {
    const auto v = sa::ThresholdGrid{0.1, 70.0, 0.1}.values();
    CHECK(v.size() == 700);
    CHECK(v.back() == doctest::Approx(70.0));
  }

  TEST_CASE("cutoff and extremum on a constructed profile") {
    const auto profile = constructed_profile();
    const auto s = sa::locate_cutoff_and_extremum(profile, "nc", sa::Extremum::minimum, 0.10);
    CHECK(s.cutoff_distance == std::optional<double>{20.0});
    CHECK(s.extremum_distance == std::optional<double>{10.0});
    CHECK(s.extremum_effect == std::optional<double>{-3.0});
    const auto mx = sa::locate_cutoff_and_extremum(profile, "nc", sa::Extremum::maximum, 0.01);
    CHECK(mx.cutoff_distance == std::optional<double>{5.0});
    CHECK(mx.extremum_distance == std::optional<double>{25.0});
    CHECK(sa::best_fit_distance(profile) == std::optional<double>{15.0});
    CHECK_THROWS_AS(sa::locate_cutoff_and_extremum(profile, "mp", sa::Extremum::minimum), InvalidArgument);
    CHECK(sa::orientation_from_sign(-0.1) == sa::Extremum::minimum);
  }

  TEST_CASE("sweep matches a direct SLX fit at each threshold") {
    std::mt19937_64 rng(31);
    const Index n = 60;
    const auto p = testing_support::random_points(rng, n, 20.0);
    const Matrix x = testing_support::random_matrix(rng, n, 2);
    const Vector y = x.col(0) + testing_support::random_vector(rng, n);
    sa::SweepOptions opt;
    opt.grid = {2.0, 10.0, 2.0};
    const auto profile = sa::sweep_spatial_reach(y, x, p, {"a", "b"}, opt);
    REQUIRE(profile.points.size() == 5);
    for (const auto& pt : profile.points) {
      REQUIRE_FALSE(pt.skipped);
      const Matrix lag = testing_support::dense_inverse_distance(p, 1, pt.distance) * x;
      const auto direct = econometrics::fit_slx_with_lags(y, x, lag, {"a", "b"});
      for (std::size_t j = 0; j < 2; ++j) {
        CHECK(pt.effects[j].indirect == doctest::Approx(direct.effects[j].indirect).epsilon(1e-9));
        CHECK(pt.effects[j].p_indirect == doctest::Approx(direct.effects[j].p_indirect).epsilon(1e-9));
      }
    }
  }
}

TEST_SUITE("decay") {
  TEST_CASE("decay coefficient hand case and exclusions") {
    CHECK(sa::decay_coefficient(0.8, 0.4, 2.0) == 0.5);
    CHECK(sa::decay_coefficient(0.3, 0.2, 1.0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK_FALSE(sa::decay_coefficient(0.3, 0.0, 1.0));
    CHECK_FALSE(sa::decay_coefficient(0.3, 0.2, 0.0));
    CHECK(*sa::decay_coefficient(0.3, 0.3, 0.7) == 0.0);
  }

  TEST_CASE("decay field over a weight matrix") {
    geo::Points p(3, 2);
    p << 0, 0, 1, 0, 2, 0;
    const auto w = weights::build_weights(p, weights::Scheme::inverse_distance());
    Vector rr(3), dmg(3);
    rr << 0.4, 0.2, 0.0;
    dmg << 0.0, 1.0, 0.5;
    const auto field = sa::compute_decay_coefficients({"a", "b", "c"}, rr, dmg, w);
    CHECK(field.rr0 == 0.4);
    CHECK(field.included() == 2);
    // Row a: weighted damage 2/3 * 1 + 1/3 * 0.5.
    CHECK(field.entries[0].weighted_damage == doctest::Approx(2.0 / 3.0 + 1.0 / 6.0).epsilon(1e-14));
    CHECK(*field.entries[0].k == 0.0);
    CHECK(*field.entries[1].k == doctest::Approx(0.2 / (0.2 * 0.25)).epsilon(1e-14));
    CHECK(field.entries[2].excluded_reason == "zero recovery rate");
    const auto own = sa::compute_decay_coefficients({"a", "b", "c"}, rr, dmg, w, "nc", sa::DamageSubscript::own);
    CHECK(own.entries[0].weighted_damage == 0.0);
    CHECK_FALSE(own.entries[0].k);
  }
}

TEST_SUITE("heterogeneity") {
  TEST_CASE("one-way ANOVA hand case") {
    const auto a = sa::one_way_anova({{1, 2, 3}, {4, 5, 6}});
    CHECK(a.f == doctest::Approx(13.5).epsilon(1e-12));
    CHECK(a.df_between == 1.0);
    CHECK(a.df_within == 4.0);
    // F(1, 4) tail equals the two-sided t tail with 4 df at sqrt(F).
    const double t = std::sqrt(13.5);
    const double cdf = 0.5 + 3.0 / 8.0 * (t / std::sqrt(1 + t * t / 4)) * (1 - t * t / (12 * (1 + t * t / 4)));
    CHECK(a.p_value == doctest::Approx(2.0 * (1.0 - cdf)).epsilon(1e-10));
    CHECK(a.p_value == doctest::Approx(0.0213).epsilon(1e-3));
  }

  TEST_CASE("identical group means give F = 0") {
    const auto a = sa::one_way_anova({{1, 2, 3}, {3, 2, 1}});
    CHECK(a.f == 0.0);
    CHECK(a.p_value == 1.0);
    CHECK_THROWS_AS(sa::one_way_anova({{1, 2}}), InvalidArgument);
    CHECK_THROWS_AS(sa::one_way_anova({{1}, {2}}), InvalidArgument);
  }

  TEST_CASE("empirical cdf") {
    sa::EmpiricalCdf f({3.0, 1.0, 2.0, 2.0});
    CHECK(f(0.5) == 0.0);
    CHECK(f(1.0) == 0.25);
    CHECK(f(2.0) == 0.75);
    CHECK(f(10.0) == 1.0);
    CHECK(f.support().size() == 3);
  }

  TEST_CASE("split at the feature mean") {
    Vector k(6), feat(6);
    k << 1, 2, 3, 4, 5, 6;
    feat << 0, 0, 0, 1, 1, 1;
    const auto h = sa::heterogeneity_test(k, feat, "poi");
    CHECK(h.split_value == 0.5);
    CHECK(h.low.size == 3);
    CHECK(h.low.mean_k == 2.0);
    CHECK(h.high.mean_k == 5.0);
    CHECK(h.anova.f == doctest::Approx(13.5));
    CHECK_THROWS_AS(sa::heterogeneity_test(k, Vector::Ones(6), "const"), InvalidArgument);
  }
}
