#pragma once

#include <spillover/common.hpp>
#include <spillover/ingest.hpp>

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spillover::damage {

inline constexpr double kDefaultPdeCap = 1.0;
inline constexpr double kDefaultMatchRadiusMiles = 0.25;
inline constexpr double kMajorDamageThreshold = 0.5;

// log(nfip) = intercept + slope * log(ia), fitted by least squares.
struct BridgeModel {
  double slope = 1.0;
  double intercept = 0.0;
  double r_squared = 1.0;
  std::size_t n = 0;
  std::vector<std::string> warnings;

  // exp(intercept) * ia^slope
  double apply(double ia_amount) const;
};

// Throws InvalidArgument on fewer than three pairs, a nonpositive amount, or constant IA amounts.
BridgeModel fit_ia_nfip_bridge(std::span<const ingest::BridgePair> pairs);

struct ClaimMatch {
  std::size_t claim = 0;   // index into the claims table
  std::size_t parcel = 0;  // index into the parcels table
  double distance_miles = 0.0;

  bool operator==(const ClaimMatch&) const = default;
};

struct MatchResult {
  std::vector<ClaimMatch> matched;       // ordered by claim index
  std::vector<std::size_t> unmatched;    // claim indices with no parcel in range
};

// Nearest parcel centroid per claim on the local plane; equal distances resolve to the
// lexicographically smallest parcel_id.
MatchResult match_claims_to_parcels(std::span<const ingest::ClaimRecord> claims,
                                    std::span<const ingest::ParcelRecord> parcels,
                                    double max_distance_miles = kDefaultMatchRadiusMiles);

struct PdeRecord {
  std::string parcel_id;
  std::string cbg_id;
  double claim_value = 0.0;  // harmonized to the NFIP scale
  double market_value = 0.0;
  double pde = 0.0;
  bool capped = false;
  ingest::ClaimSource source = ingest::ClaimSource::NFIP;

  bool operator==(const PdeRecord&) const = default;
};

// One record per matched parcel, sorted by parcel_id. A parcel with any NFIP claim uses the
// summed NFIP amounts; otherwise its IA amounts pass through the bridge (required then).
std::vector<PdeRecord> compute_pde(std::span<const ingest::ClaimRecord> claims,
                                   std::span<const ingest::ParcelRecord> parcels, const MatchResult& matches,
                                   const std::optional<BridgeModel>& bridge, double pde_cap = kDefaultPdeCap);

struct CbgDamage {
  std::string cbg_id;
  std::size_t nc = 0;   // damaged properties
  double mp = 0.0;      // mean PDE
  double sdp = 0.0;     // sample standard deviation of PDE
  std::size_t mdp = 0;  // properties with PDE > 0.5

  bool operator==(const CbgDamage&) const = default;
};

// One entry per CBG in index order; CBGs without claims get all-zero metrics.
std::vector<CbgDamage> aggregate_cbg_damage(std::span<const PdeRecord> records, const ingest::CbgIndex& index);

void write_pde_records(std::ostream& out, std::span<const PdeRecord> records);
void write_cbg_damage(std::ostream& out, std::span<const CbgDamage> rows);
std::vector<CbgDamage> read_cbg_damage(const csv::Table& table);

}  // namespace spillover::damage
