#include <doctest.h>

#include "support.hpp"

#include <spillover/damage.hpp>

#include <cmath>

using namespace spillover;

namespace {

ingest::ParcelRecord parcel(std::string id, double lon, double lat, double mv, std::string cbg = "A") {
  return {std::move(id), lon, lat, mv, std::move(cbg)};
}

ingest::ClaimRecord claim(std::string id, ingest::ClaimSource s, double lon, double lat, double amount) {
  return {std::move(id), s, lon, lat, amount, std::nullopt};
}

}  // namespace

TEST_SUITE("damage") {
  TEST_CASE("bridge: exact log-log line") {
    std::vector<ingest::BridgePair> pairs;
    for (double ia : {100.0, 500.0, 2000.0, 9000.0}) pairs.push_back({ia, std::exp(0.2 + 1.1 * std::log(ia))});
    const auto m = damage::fit_ia_nfip_bridge(pairs);
    CHECK(m.slope == doctest::Approx(1.1).epsilon(1e-12));
    CHECK(m.intercept == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(m.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.apply(1000.0) == doctest::Approx(std::exp(0.2) * std::pow(1000.0, 1.1)).epsilon(1e-12));
  }

  TEST_CASE("bridge: identical IA amounts are degenerate") {
    std::vector<ingest::BridgePair> pairs{{100, 50}, {100, 60}, {100, 70}};
    CHECK_THROWS_AS(damage::fit_ia_nfip_bridge(pairs), InvalidArgument);
  }

  TEST_CASE("bridge: slope matches a normal-equations oracle") {
    std::mt19937_64 rng(7);
    std::lognormal_distribution<double> ia(8.0, 1.0), noise(0.0, 0.3);
    std::vector<ingest::BridgePair> pairs;
    for (int i = 0; i < 100; ++i) {
      const double a = ia(rng);
      pairs.push_back({a, 1.3 * std::pow(a, 0.9) * noise(rng)});
    }
    Matrix design(100, 2);
    Vector y(100);
    for (int i = 0; i < 100; ++i) {
      design(i, 0) = 1.0;
      design(i, 1) = std::log(pairs[static_cast<std::size_t>(i)].ia_amount);
      y(i) = std::log(pairs[static_cast<std::size_t>(i)].nfip_amount);
    }
    const Vector beta = testing_support::normal_equations(y, design);
    const auto m = damage::fit_ia_nfip_bridge(pairs);
    CHECK(std::abs(m.slope - beta(1)) <= 1e-8);
    CHECK(std::abs(m.intercept - beta(0)) <= 1e-8);
  }

  TEST_CASE("matching: nearest of two parcels and tie-break") {
    std::vector<ingest::ParcelRecord> parcels{parcel("far", 0.0, 0.01, 1), parcel("near", 0.0, 0.001, 1)};
    std::vector<ingest::ClaimRecord> claims{claim("c", ingest::ClaimSource::NFIP, 0.0, 0.0, 1)};
    auto m = damage::match_claims_to_parcels(claims, parcels, 1.0);
    REQUIRE(m.matched.size() == 1);
    CHECK(parcels[m.matched[0].parcel].parcel_id == "near");

    parcels = {parcel("zeta", 0.0, 0.001, 1), parcel("alpha", 0.0, -0.001, 1)};
    m = damage::match_claims_to_parcels(claims, parcels, 1.0);
    REQUIRE(m.matched.size() == 1);
    CHECK(parcels[m.matched[0].parcel].parcel_id == "alpha");
  }

  TEST_CASE("matching: grid index equals exhaustive scan") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> lon(-95.5, -95.3), lat(29.7, 29.9);
    std::vector<ingest::ParcelRecord> parcels;
    for (int i = 0; i < 400; ++i) parcels.push_back(parcel("p" + std::to_string(i), lon(rng), lat(rng), 1));
    std::vector<ingest::ClaimRecord> claims;
    for (int i = 0; i < 1000; ++i) claims.push_back(claim("c" + std::to_string(i), ingest::ClaimSource::NFIP, lon(rng), lat(rng), 1));
    const double radius = 0.5;
    const auto m = damage::match_claims_to_parcels(claims, parcels, radius);

    // Exhaustive scan on the equirectangular plane referenced at the mean parcel latitude.
    double ref_lat = 0.0;
    for (const auto& p : parcels) ref_lat += p.lat;
    ref_lat /= static_cast<double>(parcels.size());
    const double ky = 3958.8 * M_PI / 180.0, kx = ky * std::cos(ref_lat * M_PI / 180.0);
    std::size_t matched = 0;
    for (std::size_t c = 0; c < claims.size(); ++c) {
      std::optional<std::size_t> best;
      double best_d = 0.0;
      for (std::size_t p = 0; p < parcels.size(); ++p) {
        const double dx = (claims[c].lon - parcels[p].lon) * kx, dy = (claims[c].lat - parcels[p].lat) * ky;
        const double d = std::sqrt(dx * dx + dy * dy);
        if (d <= radius && (!best || d < best_d || (d == best_d && parcels[p].parcel_id < parcels[*best].parcel_id))) {
          best = p;
          best_d = d;
        }
      }
      auto it = std::find_if(m.matched.begin(), m.matched.end(), [&](const auto& x) { return x.claim == c; });
      if (best) {
        ++matched;
        REQUIRE(it != m.matched.end());
        CHECK(it->parcel == *best);
      } else {
        CHECK(it == m.matched.end());
      }
    }
    CHECK(m.matched.size() == matched);
  }

  TEST_CASE("PDE: ratio, NFIP precedence, cap") {
    std::vector<ingest::ParcelRecord> parcels{parcel("p1", 0, 0, 200000), parcel("p2", 0.01, 0, 200000),
                                              parcel("p3", 0.02, 0, 200000)};
    std::vector<ingest::ClaimRecord> claims{claim("a", ingest::ClaimSource::NFIP, 0, 0, 50000),
                                            claim("b", ingest::ClaimSource::NFIP, 0.01, 0, 30000),
                                            claim("c", ingest::ClaimSource::IA, 0.01, 0, 90000),
                                            claim("d", ingest::ClaimSource::NFIP, 0.02, 0, 300000)};
    const auto matches = damage::match_claims_to_parcels(claims, parcels, 0.1);
    const auto pde = damage::compute_pde(claims, parcels, matches, std::nullopt, 1.0);
    REQUIRE(pde.size() == 3);
    CHECK(pde[0].pde == 0.25);
    CHECK(pde[1].claim_value == 30000.0);
    CHECK(pde[2].pde == 1.0);
    CHECK(pde[2].capped);
  }

  TEST_CASE("PDE: IA-only parcel needs the bridge") {
    std::vector<ingest::ParcelRecord> parcels{parcel("p1", 0, 0, 1000)};
    std::vector<ingest::ClaimRecord> claims{claim("a", ingest::ClaimSource::IA, 0, 0, 100)};
    const auto matches = damage::match_claims_to_parcels(claims, parcels, 0.1);
    CHECK_THROWS_AS(damage::compute_pde(claims, parcels, matches, std::nullopt, 1.0), InvalidArgument);
    damage::BridgeModel b;
    b.slope = 1.0;
    b.intercept = std::log(2.0);
    const auto pde = damage::compute_pde(claims, parcels, matches, b, 1.0);
    CHECK(pde[0].pde == doctest::Approx(0.2).epsilon(1e-12));
  }

  TEST_CASE("aggregation: hand case, empty CBG, singleton") {
    ingest::CbgIndex index({{"A", 0, 0, 1}, {"B", 0.1, 0, 1}, {"C", 0.2, 0, 1}});
    std::vector<damage::PdeRecord> recs;
    for (double v : {0.2, 0.6, 0.7}) recs.push_back({"p" + std::to_string(v), "A", 0, 0, v, false});
    recs.push_back({"q", "C", 0, 0, 0.4, false});
    const auto rows = damage::aggregate_cbg_damage(recs, index);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].nc == 3);
    CHECK(rows[0].mp == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rows[0].sdp == doctest::Approx(std::sqrt(0.07)).epsilon(1e-12));
    CHECK(rows[0].mdp == 2);
    CHECK(rows[1] == damage::CbgDamage{"B", 0, 0.0, 0.0, 0});
    CHECK(rows[2] == damage::CbgDamage{"C", 1, 0.4, 0.0, 0});
  }
}
