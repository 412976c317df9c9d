#include <doctest.h>

#include <spillover/covariates.hpp>

using namespace spillover;

TEST_SUITE("covariates") {
  TEST_CASE("dissimilarity index: hand case and extremes") {
    Vector focus(2), ref(2);
    focus << 10, 30;
    ref << 30, 10;
    CHECK(covariates::dissimilarity_index(focus, ref) == 0.5);
    focus << 10, 20;
    ref << 20, 40;
    CHECK(covariates::dissimilarity_index(focus, ref) == 0.0);
    focus << 10, 0;
    ref << 0, 25;
    CHECK(covariates::dissimilarity_index(focus, ref) == 1.0);
    ref << 0, 0;
    CHECK_THROWS_AS(covariates::dissimilarity_index(focus, ref), InvalidArgument);
  }

  TEST_CASE("human mobility index") {
    Vector visits(3);
    visits << 28, 56, 84;
    const auto h = covariates::human_mobility_index(visits, 28);
    CHECK(h.raw(1) == 2.0);
    CHECK(h.scaled(1) == 0.5);
    CHECK(h.scaled(2) == 1.0);
    const auto z = covariates::human_mobility_index(Vector::Zero(3), 28);
    CHECK(z.constant);
    CHECK(z.scaled.isZero());
  }

  TEST_CASE("densities") {
    CHECK(covariates::density(2000, 1.0) == 2000.0);
    CHECK(covariates::density(0, 3.0) == 0.0);
    CHECK_THROWS_AS(covariates::density(5, 0.0), InvalidArgument);
  }

  TEST_CASE("min-max scaling") {
    Vector v(3);
    v << 2, 4, 6;
    const auto s = covariates::min_max_scale(v);
    CHECK(s.values(0) == 0.0);
    CHECK(s.values(1) == 0.5);
    CHECK(s.values(2) == 1.0);
    Vector c = Vector::Constant(3, 5.0);
    const auto cs = covariates::min_max_scale(c);
    CHECK(cs.constant);
    CHECK(cs.values.isZero());
    Vector unit(2);
    unit << 0, 1;
    CHECK(covariates::min_max_scale(unit).values == unit);
    // Idempotent on its own output.
    Vector r = Vector::LinSpaced(17, -3.0, 11.0).array().square();
    const Vector once = covariates::min_max_scale(r).values;
    CHECK(covariates::min_max_scale(once).values == once);
  }

  TEST_CASE("controls from tables") {
    ingest::CbgIndex index({{"A", -95.4, 29.8, 2.0}, {"B", -95.3, 29.8, 1.0}, {"C", -95.2, 29.8, 1.0}});
    std::vector<ingest::CensusRecord> census{
        {"A", "T1", 1000, 30, 10, 0, {10, 30, 30, 10}},
        {"B", "T1", 500, 10, 30, 0, {30, 10, 10, 30}},
        {"C", "T2", 100, 10, 5, 5, {5, 5, 5, 5}},
    };
    std::vector<ingest::CountRecord> poi{{"A", 4}, {"B", 0}, {"C", 1}};
    std::vector<ingest::CountRecord> roads{{"A", 10}, {"B", 2}, {"C", 3}};
    std::map<std::string, double> visits{{"A", 28}, {"B", 56}, {"C", 84}};
    const auto t = covariates::compute_controls(index, census, poi, roads, visits);
    REQUIRE(t.rows.size() == 3);
    CHECK(t.rows[0].pop == 500.0);
    CHECK(t.rows[0].poi == 2.0);
    CHECK(t.rows[0].rd == 5.0);
    // Tract T1: minority {10, 30} vs white {30, 10}; low income {40, 40} vs high {40, 40}.
    CHECK(t.rows[0].ms == 0.5);
    CHECK(t.rows[1].ms == 0.5);
    CHECK(t.rows[0].is == 0.0);
    CHECK(t.rows[1].hmi == 0.5);
  }
}
