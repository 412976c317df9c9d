#pragma once

#include <spillover/common.hpp>
#include <spillover/csv.hpp>
#include <spillover/dates.hpp>
#include <spillover/geo.hpp>

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace spillover::ingest {

struct ParcelRecord {
  std::string parcel_id;
  double lon = 0.0;
  double lat = 0.0;
  double market_value = 0.0;  // USD, > 0
  std::string cbg_id;

  bool operator==(const ParcelRecord&) const = default;
};

enum class ClaimSource { NFIP, IA };

std::string to_string(ClaimSource source);
std::optional<ClaimSource> parse_claim_source(std::string_view text);

struct ClaimRecord {
  std::string claim_id;
  ClaimSource source = ClaimSource::NFIP;
  double lon = 0.0;
  double lat = 0.0;
  double amount = 0.0;  // USD, > 0
  std::optional<std::string> parcel_hint;

  bool operator==(const ClaimRecord&) const = default;
};

struct StopRecord {
  std::string device_id;
  std::string cbg_id;
  Timestamp start;
  double dwell_hours = 0.0;

  Date start_date() const { return std::chrono::floor<std::chrono::days>(start); }
  bool operator==(const StopRecord&) const = default;
};

struct CbgRecord {
  std::string cbg_id;
  double lon = 0.0;
  double lat = 0.0;
  double land_area_sqmi = 0.0;

  bool operator==(const CbgRecord&) const = default;
};

using AdjacencyPair = std::pair<std::string, std::string>;

struct CensusRecord {
  std::string cbg_id;
  std::string tract_id;
  double pop_total = 0.0;
  double pop_nhwhite = 0.0;
  double pop_nhblack = 0.0;
  double pop_nhasian = 0.0;
  std::array<double, 4> income_quartiles{};

  bool operator==(const CensusRecord&) const = default;
};

struct CountRecord {
  std::string cbg_id;
  double count = 0.0;

  bool operator==(const CountRecord&) const = default;
};

// One property carrying both an IA assessment and an NFIP payment.
struct BridgePair {
  double ia_amount = 0.0;
  double nfip_amount = 0.0;

  bool operator==(const BridgePair&) const = default;
};

// Census block group lookup: centroids, land areas, adjacency as supplied.
class CbgIndex {
 public:
  CbgIndex() = default;
  // Throws InvalidArgument on fewer than two CBGs, duplicate ids, or unknown adjacency ids.
  CbgIndex(std::vector<CbgRecord> cbgs, std::vector<AdjacencyPair> adjacency = {});

  std::size_t size() const { return cbgs_.size(); }
  const std::vector<CbgRecord>& cbgs() const { return cbgs_; }
  const CbgRecord& at(std::size_t i) const { return cbgs_.at(i); }
  std::optional<std::size_t> find(std::string_view cbg_id) const;
  bool contains(std::string_view cbg_id) const { return find(cbg_id).has_value(); }

  // Directed neighbor lists exactly as loaded.
  const std::vector<std::vector<std::size_t>>& adjacency() const { return adjacency_; }
  const std::vector<AdjacencyPair>& adjacency_pairs() const { return pairs_; }
  bool has_adjacency() const { return !pairs_.empty(); }

  geo::LocalProjection projection() const;
  geo::Points planar_centroids() const;

 private:
  std::vector<CbgRecord> cbgs_;
  std::unordered_map<std::string, std::size_t> lookup_;
  std::vector<AdjacencyPair> pairs_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

template <typename Record>
struct LoadResult {
  std::vector<Record> records;
  Diagnostics rejected;  // row-numbered reasons for every skipped row
};

// Table loaders. Missing columns throw InvalidArgument; bad rows are collected in `rejected`.
// When `index` is supplied, rows naming an unknown cbg_id are rejected.
LoadResult<ParcelRecord> load_parcels(const csv::Table& table, const CbgIndex* index = nullptr);
LoadResult<ClaimRecord> load_claims(const csv::Table& table);
LoadResult<StopRecord> load_stops(const csv::Table& table, const CbgIndex* index = nullptr);
LoadResult<CbgRecord> load_cbgs(const csv::Table& table);
LoadResult<AdjacencyPair> load_adjacency(const csv::Table& table);
LoadResult<CensusRecord> load_census(const csv::Table& table, const CbgIndex* index = nullptr);
LoadResult<CountRecord> load_counts(const csv::Table& table, const std::string& count_column,
                                    const CbgIndex* index = nullptr);
LoadResult<BridgePair> load_bridge_pairs(const csv::Table& table);

void write_parcels(std::ostream& out, const std::vector<ParcelRecord>& records);
void write_claims(std::ostream& out, const std::vector<ClaimRecord>& records);
void write_stops(std::ostream& out, const std::vector<StopRecord>& records);
void write_cbgs(std::ostream& out, const std::vector<CbgRecord>& records);
void write_adjacency(std::ostream& out, const std::vector<AdjacencyPair>& records);
void write_census(std::ostream& out, const std::vector<CensusRecord>& records);
void write_counts(std::ostream& out, const std::string& count_column, const std::vector<CountRecord>& records);
void write_bridge_pairs(std::ostream& out, const std::vector<BridgePair>& records);

void write_diagnostics(std::ostream& out, const std::string& table, const Diagnostics& diagnostics);

// Every input table of one study. Optional tables stay empty when absent.
struct Dataset {
  std::vector<CbgRecord> cbgs;
  std::vector<AdjacencyPair> adjacency;
  std::vector<ParcelRecord> parcels;
  std::vector<ClaimRecord> claims;
  std::vector<StopRecord> stops;
  std::vector<CensusRecord> census;
  std::vector<CountRecord> poi;
  std::vector<CountRecord> roads;
  std::vector<BridgePair> bridge_pairs;
};

struct ValidationReport {
  std::size_t orphan_stops = 0;            // stops naming an unknown CBG
  std::size_t orphan_parcels = 0;          // parcels naming an unknown CBG
  std::size_t claims_without_parcel = 0;   // no parcel centroid within the match radius
  std::size_t parcel_hint_mismatches = 0;  // hinted parcel differs from the nearest one
  std::vector<AdjacencyPair> asymmetric_adjacency;  // A->B listed without B->A
  Diagnostics details;

  std::size_t orphan_count() const {
    return orphan_stops + orphan_parcels + claims_without_parcel + asymmetric_adjacency.size();
  }
};

ValidationReport validate_dataset(const Dataset& data, double match_radius_miles = 0.25);

}  // namespace spillover::ingest
