#include <doctest.h>

#include "support.hpp"

#include <spillover/econometrics.hpp>
#include <spillover/synthetic.hpp>

#include <cmath>
#include <sstream>

using namespace spillover;

TEST_SUITE("synthetic") {
  TEST_CASE("generation is deterministic in the spec") {
    synthetic::ScenarioSpec spec;
    spec.n = 30;
    spec.devices_per_cbg = 60;
    const auto a = synthetic::generate_scenario(spec);
    const auto b = synthetic::generate_scenario(spec);
    CHECK(a.data.stops == b.data.stops);
    CHECK(a.data.claims == b.data.claims);
    std::ostringstream ga, gb;
    synthetic::write_ground_truth(ga, a.truth);
    synthetic::write_ground_truth(gb, b.truth);
    CHECK(ga.str() == gb.str());
    spec.seed = 2;
    std::ostringstream gc;
    synthetic::write_ground_truth(gc, synthetic::generate_scenario(spec).truth);
    CHECK(gc.str() != ga.str());
  }

  TEST_CASE("planted coefficients are exact on the truth design") {
    synthetic::ScenarioSpec spec;
    spec.n = 80;
    spec.devices_per_cbg = 40;
    const auto sc = synthetic::generate_scenario(spec);
    const auto slx = econometrics::fit_slx_with_lags(sc.truth.y, sc.truth.x, sc.truth.wx, sc.truth.names);
    for (std::size_t j = 0; j < sc.truth.names.size(); ++j) {
      const auto& e = slx.effects[j];
      if (e.lag_dropped) continue;
      CHECK(e.direct == doctest::Approx(sc.truth.beta(static_cast<Index>(j))).epsilon(1e-8));
      CHECK(e.indirect == doctest::Approx(sc.truth.theta(static_cast<Index>(j))).epsilon(1e-8));
    }
  }

  TEST_CASE("realized rates track the planted ones up to count rounding") {
    synthetic::ScenarioSpec spec;
    spec.n = 40;
    const auto sc = synthetic::generate_scenario(spec);
    const double v_b = spec.baseline_visit_share * spec.devices_per_cbg;
    for (Index i = 0; i < sc.truth.y.size(); ++i) {
      REQUIRE_FALSE(std::isnan(sc.truth.realized_rr(i)));
      CHECK(std::abs(sc.truth.realized_rr(i) - sc.truth.y(i)) <= 1.0 / v_b);
    }
  }

  TEST_CASE("no dip means no perturbation") {
    synthetic::ScenarioSpec spec;
    spec.n = 20;
    spec.devices_per_cbg = 40;
    spec.dip_depth = 0.0;
    const auto sc = synthetic::generate_scenario(spec);
    CHECK(sc.truth.realized_rr.array().isNaN().all());
  }

  TEST_CASE("infeasible specs are rejected") {
    synthetic::ScenarioSpec spec;
    spec.n = 5;
    CHECK_THROWS_AS(synthetic::validate(spec), InvalidArgument);
    spec = {};
    spec.beta0 = -5.0;
    CHECK_THROWS_AS(synthetic::generate_scenario(spec), InvalidArgument);
    spec = {};
    spec.beta["xyz"] = 1.0;
    CHECK_THROWS_AS(synthetic::validate(spec), InvalidArgument);
  }

  TEST_CASE("spec round-trips through json") {
    synthetic::ScenarioSpec spec;
    spec.seed = 99;
    spec.radius_miles = 12.5;
    std::stringstream ss;
    synthetic::write_spec(ss, spec);
    const auto back = synthetic::read_spec(ss);
    CHECK(back.seed == 99);
    CHECK(back.radius_miles == 12.5);
    CHECK(back.theta == spec.theta);
  }
}
