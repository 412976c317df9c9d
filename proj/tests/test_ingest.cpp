#include <doctest.h>

#include <spillover/csv.hpp>
#include <spillover/dates.hpp>
#include <spillover/ingest.hpp>

#include <sstream>

using namespace spillover;

TEST_SUITE("csv") {
  TEST_CASE("quoted fields and embedded delimiters") {
    const auto t = csv::parse("a,b\n\"x,1\",\"say \"\"hi\"\"\"\n");
    REQUIRE(t.size() == 1);
    CHECK(t.at(0, "a") == "x,1");
    CHECK(t.at(0, "b") == "say \"hi\"");
  }

  TEST_CASE("number formatting round-trips") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 12345678.125, 0.14}) {
      CHECK(*csv::parse_double(csv::format_number(v)) == v);
    }
    CHECK(csv::format_number(2.0) == "2");
    CHECK_FALSE(csv::parse_double("1.5x"));
  }

  TEST_CASE("writer escapes") {
    std::ostringstream ss;
    csv::Writer(ss).row({"a,b", "c"});
    CHECK(ss.str() == "\"a,b\",c\n");
  }
}

TEST_SUITE("dates") {
  TEST_CASE("dates and timestamps") {
    const auto d = parse_date("2017-08-13");
    REQUIRE(d);
    CHECK(format_date(*d) == "2017-08-13");
    CHECK(weekday_index(*d) == 0);  // a Sunday
    const auto t = parse_timestamp("2017-08-25T22:00:00-05:00");
    REQUIRE(t);
    CHECK(format_timestamp(*t) == "2017-08-26T03:00:00Z");
    CHECK_FALSE(parse_date("2017-13-01"));
    CHECK(DateWindow{*d, *d + std::chrono::days(20)}.days() == 21);
  }
}

TEST_SUITE("ingest") {
  TEST_CASE("zero-amount claim is rejected") {
    const auto t = csv::parse("claim_id,source,lon,lat,amount\nc1,NFIP,-95.4,29.8,0\nc2,IA,-95.4,29.8,100\n");
    const auto r = ingest::load_claims(t);
    REQUIRE(r.records.size() == 1);
    REQUIRE(r.rejected.size() == 1);
    CHECK(r.rejected[0].reason == "zero damage value");
    CHECK(r.rejected[0].row == 1);
  }

  TEST_CASE("empty file with header") {
    const auto r = ingest::load_parcels(csv::parse("parcel_id,lon,lat,market_value,cbg_id\n"));
    CHECK(r.records.empty());
    CHECK(r.rejected.empty());
  }

  TEST_CASE("negative market value is rejected with its row") {
    const auto t = csv::parse(
        "parcel_id,lon,lat,market_value,cbg_id\np1,-95.4,29.8,1000,g\np2,-95.4,29.8,-1,g\n");
    const auto r = ingest::load_parcels(t);
    REQUIRE(r.rejected.size() == 1);
    CHECK(r.rejected[0].row == 2);
    CHECK(r.rejected[0].subject == "p2");
  }

  TEST_CASE("missing required column throws") {
    CHECK_THROWS_AS(ingest::load_stops(csv::parse("device_id,cbg_id\n")), InvalidArgument);
  }

  TEST_CASE("validation: orphans and asymmetric adjacency") {
    ingest::Dataset d;
    d.cbgs = {{"A", -95.4, 29.8, 1.0}, {"B", -95.3, 29.8, 1.0}};
    d.adjacency = {{"A", "B"}, {"B", "A"}};
    d.stops = {{"dev", "A", *parse_timestamp("2017-08-13T09:00:00Z"), 5.0}};
    CHECK(ingest::validate_dataset(d).orphan_count() == 0);

    d.stops.push_back({"dev", "Z", *parse_timestamp("2017-08-13T09:00:00Z"), 5.0});
    d.adjacency = {{"A", "B"}};
    const auto r = ingest::validate_dataset(d);
    CHECK(r.orphan_stops == 1);
    REQUIRE(r.asymmetric_adjacency.size() == 1);
    CHECK(r.asymmetric_adjacency[0] == ingest::AdjacencyPair{"A", "B"});
  }

  TEST_CASE("cbg index adjacency is symmetric over listed pairs") {
    ingest::CbgIndex index({{"A", -95.4, 29.8, 1.0}, {"B", -95.3, 29.8, 1.0}, {"C", -95.2, 29.8, 1.0}}, {{"A", "B"}});
    CHECK(index.adjacency()[0] == std::vector<std::size_t>{1});
    CHECK(index.find("C") == std::optional<std::size_t>{2});
    const auto p = index.planar_centroids();
    // 0.1 degrees of longitude at 29.8N is about 5.99 miles.
    CHECK(p(1, 0) - p(0, 0) == doctest::Approx(0.1 * 3958.8 * M_PI / 180.0 * std::cos(29.8 * M_PI / 180.0)).epsilon(1e-9));
  }

  TEST_CASE("writers round-trip through loaders") {
    std::vector<ingest::StopRecord> stops{{"d1", "A", *parse_timestamp("2017-08-13T09:30:00Z"), 4.5}};
    std::ostringstream ss;
    ingest::write_stops(ss, stops);
    CHECK(ingest::load_stops(csv::parse(ss.str())).records == stops);
  }
}
