#include <spillover/ingest.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <unordered_set>

namespace spillover::ingest {

namespace {

// Field accessor for one data row; records the first parse failure.
class RowReader {
 public:
  RowReader(const csv::Table& table, std::size_t row) : table_(table), row_(row) {}

  const std::string& text(std::string_view column) const { return table_.at(row_, column); }

  double number(std::string_view column) {
    auto value = csv::parse_double(text(column));
    if (!value || !std::isfinite(*value)) {
      fail("unparsable numeric in column '" + std::string(column) + "'");
      return 0.0;
    }
    return *value;
  }

  void fail(std::string reason) {
    if (!error_) error_ = std::move(reason);
  }
  const std::optional<std::string>& error() const { return error_; }

 private:
  const csv::Table& table_;
  std::size_t row_;
  std::optional<std::string> error_;
};

// Runs `parse` on each row; rejected rows land in diagnostics with their 1-based data row.
template <typename Record, typename Parse>
LoadResult<Record> load_rows(const csv::Table& table, const std::vector<std::string>& columns, Parse parse) {
  table.require_columns(columns);
  LoadResult<Record> result;
  for (std::size_t r = 0; r < table.size(); ++r) {
    const std::size_t row_number = r + 1;
    if (table.rows()[r].size() != table.header().size()) {
      result.rejected.push_back({row_number, "", "field count mismatch"});
      continue;
    }
    RowReader reader(table, r);
    Record record;
    std::string subject;
    parse(reader, record, subject);
    if (reader.error()) {
      result.rejected.push_back({row_number, subject, *reader.error()});
    } else {
      result.records.push_back(std::move(record));
    }
  }
  return result;
}

void check_coordinates(RowReader& reader, double lon, double lat) {
  if (lon < -180.0 || lon > 180.0 || lat < -90.0 || lat > 90.0) reader.fail("coordinate out of range");
}

void check_cbg(RowReader& reader, const CbgIndex* index, const std::string& cbg_id) {
  if (cbg_id.empty()) reader.fail("empty cbg_id");
  if (index && !index->contains(cbg_id)) reader.fail("unknown cbg_id '" + cbg_id + "'");
}

std::string num(double v) { return csv::format_number(v); }

}  // namespace

std::string to_string(ClaimSource source) { return source == ClaimSource::NFIP ? "NFIP" : "IA"; }

std::optional<ClaimSource> parse_claim_source(std::string_view text) {
  if (text == "NFIP") return ClaimSource::NFIP;
  if (text == "IA") return ClaimSource::IA;
  return std::nullopt;
}

CbgIndex::CbgIndex(std::vector<CbgRecord> cbgs, std::vector<AdjacencyPair> adjacency)
    : cbgs_(std::move(cbgs)), pairs_(std::move(adjacency)) {
  if (cbgs_.size() < 2) throw InvalidArgument("CBG index needs at least two CBGs");
  for (std::size_t i = 0; i < cbgs_.size(); ++i) {
    if (!lookup_.emplace(cbgs_[i].cbg_id, i).second) {
      throw InvalidArgument("duplicate cbg_id '" + cbgs_[i].cbg_id + "'");
    }
    if (!(cbgs_[i].land_area_sqmi > 0.0)) throw InvalidArgument("nonpositive land area for " + cbgs_[i].cbg_id);
  }
  adjacency_.resize(cbgs_.size());
  for (const auto& [a, b] : pairs_) {
    auto ia = find(a), ib = find(b);
    if (!ia || !ib) throw InvalidArgument("adjacency references unknown cbg_id '" + (ia ? b : a) + "'");
    if (*ia == *ib) continue;
    auto& list = adjacency_[*ia];
    if (std::find(list.begin(), list.end(), *ib) == list.end()) list.push_back(*ib);
  }
  for (auto& list : adjacency_) std::sort(list.begin(), list.end());
}

std::optional<std::size_t> CbgIndex::find(std::string_view cbg_id) const {
  auto it = lookup_.find(std::string(cbg_id));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

geo::LocalProjection CbgIndex::projection() const {
  std::vector<double> lons, lats;
  for (const auto& c : cbgs_) {
    lons.push_back(c.lon);
    lats.push_back(c.lat);
  }
  return geo::LocalProjection::centered_on(lons, lats);
}

geo::Points CbgIndex::planar_centroids() const {
  std::vector<double> lons, lats;
  for (const auto& c : cbgs_) {
    lons.push_back(c.lon);
    lats.push_back(c.lat);
  }
  return projection().to_miles(lons, lats);
}

LoadResult<ParcelRecord> load_parcels(const csv::Table& table, const CbgIndex* index) {
  std::unordered_set<std::string> seen;
  return load_rows<ParcelRecord>(
      table, {"parcel_id", "lon", "lat", "market_value", "cbg_id"},
      [&](RowReader& r, ParcelRecord& p, std::string& subject) {
        p.parcel_id = subject = r.text("parcel_id");
        p.lon = r.number("lon");
        p.lat = r.number("lat");
        p.market_value = r.number("market_value");
        p.cbg_id = r.text("cbg_id");
        if (r.error()) return;
        if (p.parcel_id.empty()) r.fail("empty parcel_id");
        if (!(p.market_value > 0.0)) r.fail("nonpositive market value");
        check_coordinates(r, p.lon, p.lat);
        check_cbg(r, index, p.cbg_id);
        if (!r.error() && !seen.insert(p.parcel_id).second) r.fail("duplicate parcel_id");
      });
}

LoadResult<ClaimRecord> load_claims(const csv::Table& table) {
  const bool has_hint = table.column("parcel_id").has_value();
  std::set<std::pair<ClaimSource, std::string>> seen;
  return load_rows<ClaimRecord>(
      table, {"claim_id", "source", "lon", "lat", "amount"},
      [&](RowReader& r, ClaimRecord& c, std::string& subject) {
        c.claim_id = subject = r.text("claim_id");
        auto source = parse_claim_source(r.text("source"));
        if (!source) r.fail("unknown source '" + r.text("source") + "'");
        c.lon = r.number("lon");
        c.lat = r.number("lat");
        c.amount = r.number("amount");
        if (has_hint && !r.text("parcel_id").empty()) c.parcel_hint = r.text("parcel_id");
        if (r.error()) return;
        c.source = *source;
        if (c.claim_id.empty()) r.fail("empty claim_id");
        if (c.amount == 0.0) r.fail("zero damage value");
        if (c.amount < 0.0) r.fail("negative damage value");
        check_coordinates(r, c.lon, c.lat);
        if (!r.error() && !seen.emplace(c.source, c.claim_id).second) r.fail("duplicate claim_id");
      });
}

LoadResult<StopRecord> load_stops(const csv::Table& table, const CbgIndex* index) {
  return load_rows<StopRecord>(
      table, {"device_id", "cbg_id", "start_iso8601", "dwell_hours"},
      [&](RowReader& r, StopRecord& s, std::string& subject) {
        s.device_id = subject = r.text("device_id");
        s.cbg_id = r.text("cbg_id");
        auto start = parse_timestamp(r.text("start_iso8601"));
        if (!start) r.fail("unparsable timestamp");
        s.dwell_hours = r.number("dwell_hours");
        if (r.error()) return;
        s.start = *start;
        if (s.device_id.empty()) r.fail("empty device_id");
        if (s.dwell_hours < 0.0) r.fail("negative dwell");
        check_cbg(r, index, s.cbg_id);
      });
}

LoadResult<CbgRecord> load_cbgs(const csv::Table& table) {
  std::unordered_set<std::string> seen;
  return load_rows<CbgRecord>(table, {"cbg_id", "lon", "lat", "land_area_sqmi"},
                              [&](RowReader& r, CbgRecord& c, std::string& subject) {
                                c.cbg_id = subject = r.text("cbg_id");
                                c.lon = r.number("lon");
                                c.lat = r.number("lat");
                                c.land_area_sqmi = r.number("land_area_sqmi");
                                if (r.error()) return;
                                if (c.cbg_id.empty()) r.fail("empty cbg_id");
                                if (!(c.land_area_sqmi > 0.0)) r.fail("nonpositive land area");
                                check_coordinates(r, c.lon, c.lat);
                                if (!r.error() && !seen.insert(c.cbg_id).second) r.fail("duplicate cbg_id");
                              });
}

LoadResult<AdjacencyPair> load_adjacency(const csv::Table& table) {
  return load_rows<AdjacencyPair>(table, {"cbg_id_a", "cbg_id_b"},
                                  [&](RowReader& r, AdjacencyPair& p, std::string& subject) {
                                    p.first = subject = r.text("cbg_id_a");
                                    p.second = r.text("cbg_id_b");
                                    if (p.first.empty() || p.second.empty()) r.fail("empty cbg_id");
                                    if (p.first == p.second) r.fail("self adjacency");
                                  });
}

LoadResult<CensusRecord> load_census(const csv::Table& table, const CbgIndex* index) {
  std::unordered_set<std::string> seen;
  return load_rows<CensusRecord>(
      table,
      {"cbg_id", "tract_id", "pop_total", "pop_nhwhite", "pop_nhblack", "pop_nhasian", "income_q1", "income_q2",
       "income_q3", "income_q4"},
      [&](RowReader& r, CensusRecord& c, std::string& subject) {
        c.cbg_id = subject = r.text("cbg_id");
        c.tract_id = r.text("tract_id");
        c.pop_total = r.number("pop_total");
        c.pop_nhwhite = r.number("pop_nhwhite");
        c.pop_nhblack = r.number("pop_nhblack");
        c.pop_nhasian = r.number("pop_nhasian");
        for (int q = 0; q < 4; ++q) c.income_quartiles[q] = r.number("income_q" + std::to_string(q + 1));
        if (r.error()) return;
        if (c.tract_id.empty()) r.fail("empty tract_id");
        const bool negative = c.pop_total < 0 || c.pop_nhwhite < 0 || c.pop_nhblack < 0 || c.pop_nhasian < 0 ||
                              std::any_of(c.income_quartiles.begin(), c.income_quartiles.end(),
                                          [](double v) { return v < 0; });
        if (negative) r.fail("negative count");
        check_cbg(r, index, c.cbg_id);
        if (!r.error() && !seen.insert(c.cbg_id).second) r.fail("duplicate cbg_id");
      });
}

LoadResult<CountRecord> load_counts(const csv::Table& table, const std::string& count_column,
                                    const CbgIndex* index) {
  std::unordered_set<std::string> seen;
  return load_rows<CountRecord>(table, {"cbg_id", count_column},
                                [&](RowReader& r, CountRecord& c, std::string& subject) {
                                  c.cbg_id = subject = r.text("cbg_id");
                                  c.count = r.number(count_column);
                                  if (r.error()) return;
                                  if (c.count < 0) r.fail("negative count");
                                  check_cbg(r, index, c.cbg_id);
                                  if (!r.error() && !seen.insert(c.cbg_id).second) r.fail("duplicate cbg_id");
                                });
}

LoadResult<BridgePair> load_bridge_pairs(const csv::Table& table) {
  return load_rows<BridgePair>(table, {"ia_amount", "nfip_amount"},
                               [&](RowReader& r, BridgePair& p, std::string&) {
                                 p.ia_amount = r.number("ia_amount");
                                 p.nfip_amount = r.number("nfip_amount");
                                 if (r.error()) return;
                                 if (!(p.ia_amount > 0.0) || !(p.nfip_amount > 0.0)) r.fail("nonpositive amount");
                               });
}

void write_parcels(std::ostream& out, const std::vector<ParcelRecord>& records) {
  csv::Writer w(out);
  w.row({"parcel_id", "lon", "lat", "market_value", "cbg_id"});
  for (const auto& p : records) w.row({p.parcel_id, num(p.lon), num(p.lat), num(p.market_value), p.cbg_id});
}

void write_claims(std::ostream& out, const std::vector<ClaimRecord>& records) {
  const bool hints = std::any_of(records.begin(), records.end(), [](const auto& c) { return c.parcel_hint; });
  csv::Writer w(out);
  std::vector<std::string> header{"claim_id", "source", "lon", "lat", "amount"};
  if (hints) header.push_back("parcel_id");
  w.row(header);
  for (const auto& c : records) {
    std::vector<std::string> row{c.claim_id, to_string(c.source), num(c.lon), num(c.lat), num(c.amount)};
    if (hints) row.push_back(c.parcel_hint.value_or(""));
    w.row(row);
  }
}

void write_stops(std::ostream& out, const std::vector<StopRecord>& records) {
  csv::Writer w(out);
  w.row({"device_id", "cbg_id", "start_iso8601", "dwell_hours"});
  for (const auto& s : records) w.row({s.device_id, s.cbg_id, format_timestamp(s.start), num(s.dwell_hours)});
}

void write_cbgs(std::ostream& out, const std::vector<CbgRecord>& records) {
  csv::Writer w(out);
  w.row({"cbg_id", "lon", "lat", "land_area_sqmi"});
  for (const auto& c : records) w.row({c.cbg_id, num(c.lon), num(c.lat), num(c.land_area_sqmi)});
}

void write_adjacency(std::ostream& out, const std::vector<AdjacencyPair>& records) {
  csv::Writer w(out);
  w.row({"cbg_id_a", "cbg_id_b"});
  for (const auto& [a, b] : records) w.row({a, b});
}

void write_census(std::ostream& out, const std::vector<CensusRecord>& records) {
  csv::Writer w(out);
  w.row({"cbg_id", "tract_id", "pop_total", "pop_nhwhite", "pop_nhblack", "pop_nhasian", "income_q1", "income_q2",
         "income_q3", "income_q4"});
  for (const auto& c : records) {
    w.row({c.cbg_id, c.tract_id, num(c.pop_total), num(c.pop_nhwhite), num(c.pop_nhblack), num(c.pop_nhasian),
           num(c.income_quartiles[0]), num(c.income_quartiles[1]), num(c.income_quartiles[2]),
           num(c.income_quartiles[3])});
  }
}

void write_counts(std::ostream& out, const std::string& count_column, const std::vector<CountRecord>& records) {
  csv::Writer w(out);
  w.row({"cbg_id", count_column});
  for (const auto& c : records) w.row({c.cbg_id, num(c.count)});
}

void write_bridge_pairs(std::ostream& out, const std::vector<BridgePair>& records) {
  csv::Writer w(out);
  w.row({"ia_amount", "nfip_amount"});
  for (const auto& p : records) w.row({num(p.ia_amount), num(p.nfip_amount)});
}

void write_diagnostics(std::ostream& out, const std::string& table, const Diagnostics& diagnostics) {
  csv::Writer w(out);
  for (const auto& d : diagnostics) w.row({table, std::to_string(d.row), d.subject, d.reason});
}

ValidationReport validate_dataset(const Dataset& data, double match_radius_miles) {
  ValidationReport report;
  std::unordered_set<std::string> known;
  for (const auto& c : data.cbgs) known.insert(c.cbg_id);

  for (std::size_t i = 0; i < data.stops.size(); ++i) {
    if (!known.contains(data.stops[i].cbg_id)) {
      ++report.orphan_stops;
      report.details.push_back({i + 1, data.stops[i].device_id, "stop references unknown CBG " + data.stops[i].cbg_id});
    }
  }
  for (std::size_t i = 0; i < data.parcels.size(); ++i) {
    if (!known.contains(data.parcels[i].cbg_id)) {
      ++report.orphan_parcels;
      report.details.push_back({i + 1, data.parcels[i].parcel_id, "parcel references unknown CBG"});
    }
  }

  std::set<AdjacencyPair> directed(data.adjacency.begin(), data.adjacency.end());
  for (const auto& [a, b] : directed) {
    if (!directed.contains({b, a})) {
      report.asymmetric_adjacency.emplace_back(a, b);
      report.details.push_back({0, a, "adjacency " + a + "->" + b + " has no reverse entry"});
    }
  }

  if (!data.claims.empty()) {
    if (data.parcels.empty()) {
      report.claims_without_parcel = data.claims.size();
    } else {
      std::vector<double> lons, lats;
      for (const auto& p : data.parcels) {
        lons.push_back(p.lon);
        lats.push_back(p.lat);
      }
      const auto projection = geo::LocalProjection::centered_on(lons, lats);
      const geo::GridIndex grid(projection.to_miles(lons, lats), match_radius_miles);
      for (std::size_t i = 0; i < data.claims.size(); ++i) {
        const auto& c = data.claims[i];
        auto hit = grid.nearest_within(projection.to_miles(c.lon, c.lat), match_radius_miles);
        if (!hit) {
          ++report.claims_without_parcel;
          report.details.push_back({i + 1, c.claim_id, "no parcel within match radius"});
        } else if (c.parcel_hint && data.parcels[static_cast<std::size_t>(*hit)].parcel_id != *c.parcel_hint) {
          ++report.parcel_hint_mismatches;
        }
      }
    }
  }
  return report;
}

}  // namespace spillover::ingest
