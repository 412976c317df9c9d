#include <doctest.h>

#include <spillover/mobility.hpp>

#include <cmath>
#include <random>

using namespace spillover;
using namespace std::chrono;

namespace {

Date on(const char* s) { return *parse_date(s); }

ingest::StopRecord stop(std::string device, std::string cbg, const char* when, double hours) {
  return {std::move(device), std::move(cbg), *parse_timestamp(when), hours};
}

mobility::MovementSeries series_from(Date first, const std::vector<double>& rates) {
  mobility::MovementSeries s;
  s.cbg_id = "A";
  s.first_date = first;
  s.rate = rates;
  s.residents.assign(rates.size(), 100);
  for (double r : rates) s.visitors.push_back(static_cast<int>(std::lround(r * 100)));
  return s;
}

}  // namespace

TEST_SUITE("mobility") {
  TEST_CASE("home detection") {
    std::vector<ingest::StopRecord> stops{
        stop("d1", "A", "2017-08-01T00:00:00Z", 26),
        stop("d3", "C", "2017-08-01T00:00:00Z", 20),
    };
    const auto homes = mobility::detect_home_cbgs(stops);
    CHECK(homes.at("d1") == "A");
    CHECK_FALSE(homes.contains("d3"));

    // Cumulative dwell decides between qualifying CBGs: A 26 h vs B 40 h.
    std::vector<ingest::StopRecord> tie{stop("d", "A", "2017-08-01T00:00:00Z", 26),
                                        stop("d", "B", "2017-08-03T00:00:00Z", 40)};
    CHECK(mobility::detect_home_cbgs(tie).at("d") == "B");
  }

  TEST_CASE("daily movement rate: hand count and thresholds") {
    std::vector<ingest::StopRecord> stops;
    mobility::HomeAssignment homes;
    for (int i = 0; i < 10; ++i) {
      const std::string dev = "d" + std::to_string(i);
      homes[dev] = "A";
      stops.push_back(stop(dev, "A", "2017-08-13T01:00:00Z", 2));
      if (i < 6) stops.push_back(stop(dev, "B", "2017-08-13T09:00:00Z", 4));
      if (i == 6) stops.push_back(stop(dev, "B", "2017-08-13T09:00:00Z", 3));
    }
    const DateWindow w{on("2017-08-13"), on("2017-08-14")};
    const auto series = mobility::compute_daily_movement(stops, homes, w);
    REQUIRE(series.size() == 1);
    CHECK(series[0].residents[0] == 10);
    CHECK(series[0].visitors[0] == 6);
    CHECK(series[0].rate[0] == 0.6);
    CHECK(std::isnan(series[0].rate[1]));
  }

  TEST_CASE("weekly baseline") {
    std::vector<double> rates(21, 0.4);
    const Date first = on("2017-08-01");  // a Tuesday
    for (int i = 0; i < 21; ++i) {
      if (weekday_index(first + days(i)) == 1) rates[static_cast<std::size_t>(i)] = std::vector<double>{0.50, 0.52, 0.48}[static_cast<std::size_t>(i / 7)];
    }
    const auto bl = mobility::compute_baseline(series_from(first, rates), {first, first + days(20)});
    CHECK(bl[1] == doctest::Approx(0.50).epsilon(1e-15));
    for (int d : {0, 2, 3, 4, 5, 6}) CHECK(bl[static_cast<std::size_t>(d)] == doctest::Approx(0.4).epsilon(1e-15));
  }

  TEST_CASE("baseline window missing a weekday throws") {
    const Date first = on("2017-08-01");
    CHECK_THROWS_AS(mobility::compute_baseline(series_from(first, std::vector<double>(7, 0.4)), {first, first + days(5)}),
                    InvalidArgument);
  }

  TEST_CASE("gap interpolation") {
    std::vector<double> v{1.0, NAN, NAN, 4.0};
    CHECK(mobility::interpolate_gaps(v, 2));
    CHECK(v[1] == 2.0);
    CHECK(v[2] == 3.0);
    std::vector<double> w{1.0, NAN, NAN, NAN, 5.0};
    CHECK_FALSE(mobility::interpolate_gaps(w, 2));
  }

  TEST_CASE("recovery on the constructed percent-change path") {
    const std::vector<double> pc{0.0, -0.2, -0.6, -0.4, -0.25, -0.18};
    const auto r = mobility::detect_recovery(pc);
    CHECK(r.status == mobility::RecoveryStatus::recovered);
    CHECK(r.trough == std::optional<std::size_t>{2});
    CHECK(r.steady == std::optional<std::size_t>{5});
    REQUIRE(r.rate);
    // 0.42 / 3 evaluated in binary floating point.
    CHECK(std::abs(*r.rate - 0.14) <= 1e-15);
  }

  TEST_CASE("recovery: flat path and oscillation") {
    CHECK(mobility::detect_recovery(std::vector<double>(6, 0.0)).status == mobility::RecoveryStatus::no_perturbation);
    const std::vector<double> osc{0.0, -0.6, -0.3, -0.5, -0.2, -0.45};
    const auto r = mobility::detect_recovery(osc);
    CHECK(r.status == mobility::RecoveryStatus::censored);
    CHECK_FALSE(r.rate);
  }

  TEST_CASE("recovery through movement rates is scale free") {
    const Date first = on("2017-08-13");
    std::vector<double> rates(7, 0.5);
    for (double pc : {-0.2, -0.6, -0.4, -0.25, -0.18, -0.17, -0.17}) rates.push_back(0.5 * (1.0 + pc));
    const DateWindow baseline{first, first + days(6)}, event{first + days(7), first + days(13)};
    const auto a = mobility::compute_recovery_rate(series_from(first, rates), baseline, event);
    for (double& r : rates) r *= 0.5;
    const auto b = mobility::compute_recovery_rate(series_from(first, rates), baseline, event);
    REQUIRE(a.rr);
    REQUIRE(b.rr);
    CHECK(a.t_s == b.t_s);
    CHECK(a.t_n == b.t_n);
    CHECK(*a.rr == doctest::Approx(*b.rr).epsilon(1e-12));
    CHECK(*a.t_s == first + days(8));
  }

  TEST_CASE("property: recovery rate is never negative") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> step(0.0, 0.15);
    int recovered = 0;
    for (int trial = 0; trial < 2000; ++trial) {
      std::vector<double> pc{0.0};
      for (int t = 1; t < 14; ++t) pc.push_back(pc.back() + step(rng));
      const auto r = mobility::detect_recovery(pc);
      if (r.status == mobility::RecoveryStatus::recovered) {
        ++recovered;
        REQUIRE(r.rate);
        CHECK(*r.rate >= 0.0);
        CHECK(*r.steady > *r.trough);
      }
    }
    CHECK(recovered > 100);
  }
}
