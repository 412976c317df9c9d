#include <spillover/covariates.hpp>

#include <ostream>
#include <unordered_map>

namespace spillover::covariates {

HumanMobilityIndex human_mobility_index(const Vector& visits, int days) {
  if (days <= 0) throw InvalidArgument("HMI needs a positive day count");
  if ((visits.array() < 0.0).any()) throw InvalidArgument("visit counts must be nonnegative");
  HumanMobilityIndex hmi;
  hmi.raw = visits / static_cast<double>(days);
  auto scaled = min_max_scale(hmi.raw);
  hmi.scaled = std::move(scaled.values);
  hmi.constant = scaled.constant;
  return hmi;
}

double density(double count, double land_area_sqmi) {
  if (!(land_area_sqmi > 0.0)) throw InvalidArgument("density needs a positive land area");
  if (count < 0.0) throw InvalidArgument("density needs a nonnegative count");
  return count / land_area_sqmi;
}

std::map<std::string, double> count_visits(std::span<const ingest::StopRecord> stops, DateWindow window) {
  std::map<std::string, double> visits;
  for (const auto& s : stops) {
    if (window.contains(s.start_date())) visits[s.cbg_id] += 1.0;
  }
  return visits;
}

ControlTable compute_controls(const ingest::CbgIndex& index, std::span<const ingest::CensusRecord> census,
                              std::span<const ingest::CountRecord> poi, std::span<const ingest::CountRecord> roads,
                              const std::map<std::string, double>& visits, int hmi_days) {
  std::unordered_map<std::string, const ingest::CensusRecord*> census_by_cbg;
  for (const auto& c : census) census_by_cbg[c.cbg_id] = &c;
  std::unordered_map<std::string, double> poi_by_cbg, roads_by_cbg;
  for (const auto& p : poi) poi_by_cbg[p.cbg_id] = p.count;
  for (const auto& r : roads) roads_by_cbg[r.cbg_id] = r.count;

  // Tract-level segregation over member CBGs.
  std::map<std::string, std::vector<const ingest::CensusRecord*>> tracts;
  for (const auto& c : census) tracts[c.tract_id].push_back(&c);
  std::map<std::string, std::optional<double>> tract_ms, tract_is;
  for (const auto& [tract, members] : tracts) {
    const auto m = static_cast<Index>(members.size());
    Vector minority(m), white(m), low(m), high(m);
    for (Index i = 0; i < m; ++i) {
      const auto* c = members[static_cast<std::size_t>(i)];
      minority(i) = c->pop_nhblack + c->pop_nhasian;
      white(i) = c->pop_nhwhite;
      low(i) = c->income_quartiles[0] + c->income_quartiles[1];
      high(i) = c->income_quartiles[2] + c->income_quartiles[3];
    }
    try {
      tract_ms[tract] = dissimilarity_index(minority, white);
    } catch (const InvalidArgument&) {
      tract_ms[tract] = std::nullopt;
    }
    try {
      tract_is[tract] = dissimilarity_index(low, high);
    } catch (const InvalidArgument&) {
      tract_is[tract] = std::nullopt;
    }
  }

  ControlTable table;
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto& cbg = index.at(i);
    auto c = census_by_cbg.find(cbg.cbg_id);
    std::string reason;
    if (c == census_by_cbg.end()) {
      reason = "missing census row";
    } else if (!poi_by_cbg.contains(cbg.cbg_id)) {
      reason = "missing POI count";
    } else if (!roads_by_cbg.contains(cbg.cbg_id)) {
      reason = "missing road segment count";
    } else if (!tract_ms[c->second->tract_id]) {
      reason = "minority segregation undefined for tract " + c->second->tract_id;
    } else if (!tract_is[c->second->tract_id]) {
      reason = "income segregation undefined for tract " + c->second->tract_id;
    }
    if (!reason.empty()) {
      table.excluded.push_back({0, cbg.cbg_id, reason});
      continue;
    }
    ControlVariables v;
    v.cbg_id = cbg.cbg_id;
    v.pop = density(c->second->pop_total, cbg.land_area_sqmi);
    v.ms = *tract_ms[c->second->tract_id];
    v.is = *tract_is[c->second->tract_id];
    v.poi = density(poi_by_cbg[cbg.cbg_id], cbg.land_area_sqmi);
    v.rd = density(roads_by_cbg[cbg.cbg_id], cbg.land_area_sqmi);
    table.rows.push_back(std::move(v));
  }

  if (!table.rows.empty()) {
    Vector counts(static_cast<Index>(table.rows.size()));
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      auto it = visits.find(table.rows[i].cbg_id);
      counts(static_cast<Index>(i)) = it == visits.end() ? 0.0 : it->second;
    }
    const auto hmi = human_mobility_index(counts, hmi_days);
    if (hmi.constant) table.warnings.push_back("HMI raw values are constant; scaled HMI set to zero");
    for (std::size_t i = 0; i < table.rows.size(); ++i) table.rows[i].hmi = hmi.scaled(static_cast<Index>(i));
  }
  return table;
}

void write_controls(std::ostream& out, std::span<const ControlVariables> rows) {
  csv::Writer w(out);
  w.row({"cbg_id", "pop", "ms", "is", "hmi", "poi", "rd"});
  for (const auto& v : rows) {
    w.row({v.cbg_id, csv::format_number(v.pop), csv::format_number(v.ms), csv::format_number(v.is),
           csv::format_number(v.hmi), csv::format_number(v.poi), csv::format_number(v.rd)});
  }
}

std::vector<ControlVariables> read_controls(const csv::Table& table) {
  table.require_columns({"cbg_id", "pop", "ms", "is", "hmi", "poi", "rd"});
  std::vector<ControlVariables> out;
  for (std::size_t r = 0; r < table.size(); ++r) {
    ControlVariables v;
    v.cbg_id = table.at(r, "cbg_id");
    double* fields[] = {&v.pop, &v.ms, &v.is, &v.hmi, &v.poi, &v.rd};
    for (std::size_t k = 0; k < control_names().size(); ++k) {
      auto value = csv::parse_double(table.at(r, control_names()[k]));
      if (!value) throw InvalidArgument("controls row " + std::to_string(r + 1) + " is malformed");
      *fields[k] = *value;
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace spillover::covariates
