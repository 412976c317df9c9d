#include <spillover/mobility.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <unordered_map>

namespace spillover::mobility {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string optional_number(const std::optional<double>& v) { return v ? csv::format_number(*v) : ""; }
std::string optional_date(const std::optional<Date>& d) { return d ? format_date(*d) : ""; }

}  // namespace

HomeAssignment detect_home_cbgs(std::span<const ingest::StopRecord> stops, double home_dwell_hours) {
  // device -> cbg -> cumulative qualifying dwell
  std::map<std::string, std::map<std::string, double>> qualifying;
  for (const auto& s : stops) {
    if (s.dwell_hours > home_dwell_hours) qualifying[s.device_id][s.cbg_id] += s.dwell_hours;
  }
  HomeAssignment homes;
  for (const auto& [device, per_cbg] : qualifying) {
    // std::map iterates cbg ids ascending, so the strict comparison keeps the smallest id on ties.
    auto best = per_cbg.begin();
    for (auto it = per_cbg.begin(); it != per_cbg.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    homes.emplace(device, best->first);
  }
  return homes;
}

std::optional<std::size_t> MovementSeries::offset(Date d) const {
  const auto diff = (d - first_date).count();
  if (diff < 0 || static_cast<std::size_t>(diff) >= rate.size()) return std::nullopt;
  return static_cast<std::size_t>(diff);
}

std::vector<MovementSeries> compute_daily_movement(std::span<const ingest::StopRecord> stops,
                                                   const HomeAssignment& homes, DateWindow study,
                                                   double visit_dwell_hours) {
  if (study.last < study.first) throw InvalidArgument("study window is empty");
  const auto days = static_cast<std::size_t>(study.days());

  // device -> per-day flags: bit 0 observed, bit 1 visited elsewhere
  std::unordered_map<std::string, std::vector<unsigned char>> flags;
  for (const auto& s : stops) {
    auto home = homes.find(s.device_id);
    if (home == homes.end()) continue;
    const Date d = s.start_date();
    if (!study.contains(d)) continue;
    auto& f = flags[s.device_id];
    if (f.empty()) f.assign(days, 0);
    const auto t = static_cast<std::size_t>((d - study.first).count());
    f[t] |= 1;
    if (s.cbg_id != home->second && s.dwell_hours >= visit_dwell_hours) f[t] |= 2;
  }

  std::map<std::string, MovementSeries> by_cbg;
  for (const auto& [device, cbg] : homes) {
    auto& series = by_cbg[cbg];
    if (series.rate.empty()) {
      series.cbg_id = cbg;
      series.first_date = study.first;
      series.rate.assign(days, kNaN);
      series.residents.assign(days, 0);
      series.visitors.assign(days, 0);
    }
    auto it = flags.find(device);
    if (it == flags.end()) continue;
    for (std::size_t t = 0; t < days; ++t) {
      if (it->second[t] & 1) ++series.residents[t];
      if (it->second[t] & 2) ++series.visitors[t];
    }
  }

  std::vector<MovementSeries> out;
  out.reserve(by_cbg.size());
  for (auto& [cbg, series] : by_cbg) {
    for (std::size_t t = 0; t < days; ++t) {
      if (series.residents[t] > 0) series.rate[t] = static_cast<double>(series.visitors[t]) / series.residents[t];
    }
    out.push_back(std::move(series));
  }
  return out;
}

WeeklyBaseline compute_baseline(const MovementSeries& series, DateWindow baseline) {
  std::array<double, 7> sum{};
  std::array<int, 7> count{};
  for (Date d = baseline.first; d <= baseline.last; d += std::chrono::days(1)) {
    auto t = series.offset(d);
    if (!t || std::isnan(series.rate[*t])) continue;
    const auto w = weekday_index(d);
    sum[w] += series.rate[*t];
    ++count[w];
  }
  WeeklyBaseline bl{};
  for (std::size_t w = 0; w < 7; ++w) {
    if (count[w] == 0) {
      throw InvalidArgument("baseline window has no sample for weekday " + std::to_string(w) + " in " + series.cbg_id);
    }
    bl[w] = sum[w] / count[w];
  }
  return bl;
}

bool interpolate_gaps(std::vector<double>& values, int max_gap) {
  const std::size_t n = values.size();
  std::size_t i = 0;
  while (i < n) {
    if (!std::isnan(values[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && std::isnan(values[j])) ++j;
    if (i == 0 || j == n || static_cast<int>(j - i) > max_gap) return false;
    const double left = values[i - 1], right = values[j];
    const double span = static_cast<double>(j - i + 1);
    for (std::size_t k = i; k < j; ++k) values[k] = left + (right - left) * static_cast<double>(k - i + 1) / span;
    i = j;
  }
  return true;
}

std::string to_string(RecoveryStatus status) {
  switch (status) {
    case RecoveryStatus::recovered:
      return "recovered";
    case RecoveryStatus::no_perturbation:
      return "no_perturbation";
    case RecoveryStatus::censored:
      return "censored";
  }
  return "censored";
}

std::optional<RecoveryStatus> parse_recovery_status(std::string_view text) {
  if (text == "recovered") return RecoveryStatus::recovered;
  if (text == "no_perturbation") return RecoveryStatus::no_perturbation;
  if (text == "censored") return RecoveryStatus::censored;
  return std::nullopt;
}

RecoveryPoint detect_recovery(std::span<const double> pc, const RecoveryParams& params) {
  RecoveryPoint point;
  if (pc.empty()) return point;
  if (std::any_of(pc.begin(), pc.end(), [](double v) { return !std::isfinite(v); })) return point;

  const auto trough = static_cast<std::size_t>(std::min_element(pc.begin(), pc.end()) - pc.begin());
  point.trough = trough;
  point.extent = -0.1 - pc[trough];
  if (pc[trough] > -params.perturbation_floor) {
    point.status = RecoveryStatus::no_perturbation;
    return point;
  }
  for (std::size_t t = trough + 1; t < pc.size(); ++t) {
    if (std::abs(pc[t] - pc[t - 1]) <= params.steady_tolerance) {
      point.steady = t;
      point.rate = (pc[t] - pc[trough]) / static_cast<double>(t - trough);
      point.status = RecoveryStatus::recovered;
      return point;
    }
  }
  point.status = RecoveryStatus::censored;
  return point;
}

RecoveryResult compute_recovery_rate(const MovementSeries& series, DateWindow baseline, DateWindow event,
                                     const RecoveryParams& params) {
  RecoveryResult r;
  r.cbg_id = series.cbg_id;
  r.first_date = series.first_date;
  r.rate = series.rate;
  r.pc.assign(series.size(), kNaN);

  if (!interpolate_gaps(r.rate, params.max_gap)) {
    r.note = "movement gap longer than " + std::to_string(params.max_gap) + " days";
    return r;
  }
  try {
    r.baseline = compute_baseline(MovementSeries{series.cbg_id, series.first_date, r.rate, {}, {}}, baseline);
  } catch (const InvalidArgument& e) {
    r.note = e.what();
    return r;
  }
  r.has_baseline = true;
  if (std::any_of(r.baseline.begin(), r.baseline.end(), [](double b) { return b == 0.0; })) {
    r.note = "zero baseline";
    return r;
  }
  for (std::size_t t = 0; t < r.pc.size(); ++t) {
    const double bl = r.baseline[weekday_index(series.date(t))];
    r.pc[t] = (r.rate[t] - bl) / bl;
  }

  if (series.size() == 0) {
    r.note = "empty movement series";
    return r;
  }
  const Date first = std::max(event.first, series.first_date);
  const Date last = std::min(event.last, series.date(series.size() - 1));
  if (last < first) {
    r.note = "event window outside study window";
    return r;
  }
  const std::size_t lo = *series.offset(first), hi = *series.offset(last);
  const auto point = detect_recovery(std::span<const double>(r.pc).subspan(lo, hi - lo + 1), params);
  r.status = point.status;
  r.recovery_extent = point.extent;
  if (point.trough) r.t_s = series.date(lo + *point.trough);
  if (point.status == RecoveryStatus::recovered) {
    r.t_n = series.date(lo + *point.steady);
    r.rr = point.rate;
  } else if (point.status == RecoveryStatus::censored) {
    r.note = "no steady state inside the event window";
  }
  return r;
}

void write_recovery(std::ostream& out, std::span<const RecoveryResult> results) {
  csv::Writer w(out);
  w.row({"cbg_id", "t_s", "t_n", "rr", "recovery_extent", "status"});
  for (const auto& r : results) {
    w.row({r.cbg_id, optional_date(r.t_s), optional_date(r.t_n), optional_number(r.rr),
           optional_number(r.recovery_extent), to_string(r.status)});
  }
}

void write_pc_series(std::ostream& out, std::span<const RecoveryResult> results) {
  csv::Writer w(out);
  w.row({"cbg_id", "date", "mr", "bl", "pc"});
  for (const auto& r : results) {
    for (std::size_t t = 0; t < r.rate.size(); ++t) {
      const Date d = r.first_date + std::chrono::days(static_cast<int>(t));
      const double bl = r.has_baseline ? r.baseline[weekday_index(d)] : kNaN;
      w.row({r.cbg_id, format_date(d), csv::format_number(r.rate[t]), csv::format_number(bl),
             csv::format_number(r.pc[t])});
    }
  }
}

std::vector<RecoveryRow> read_recovery(const csv::Table& table) {
  table.require_columns({"cbg_id", "t_s", "t_n", "rr", "recovery_extent", "status"});
  std::vector<RecoveryRow> out;
  for (std::size_t r = 0; r < table.size(); ++r) {
    RecoveryRow row;
    row.cbg_id = table.at(r, "cbg_id");
    auto status = parse_recovery_status(table.at(r, "status"));
    if (!status) throw InvalidArgument("recovery row " + std::to_string(r + 1) + " has an unknown status");
    row.status = *status;
    if (!table.at(r, "t_s").empty()) row.t_s = parse_date(table.at(r, "t_s"));
    if (!table.at(r, "t_n").empty()) row.t_n = parse_date(table.at(r, "t_n"));
    if (!table.at(r, "rr").empty()) row.rr = csv::parse_double(table.at(r, "rr"));
    if (!table.at(r, "recovery_extent").empty()) row.recovery_extent = csv::parse_double(table.at(r, "recovery_extent"));
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace spillover::mobility
