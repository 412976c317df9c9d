#include <spillover/frame.hpp>

#include <map>
#include <ostream>

namespace spillover::frame {

Index RegressionFrame::column(std::string_view name) const {
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (names[j] == name) return static_cast<Index>(j);
  }
  throw InvalidArgument("frame has no column '" + std::string(name) + "'");
}

RegressionFrame assemble_frame(const ingest::CbgIndex& index, std::span<const damage::CbgDamage> damage,
                               std::span<const covariates::ControlVariables> controls,
                               std::span<const mobility::RecoveryRow> recovery, bool scale_response) {
  std::map<std::string, const damage::CbgDamage*> damage_by_id;
  for (const auto& d : damage) damage_by_id[d.cbg_id] = &d;
  std::map<std::string, const covariates::ControlVariables*> controls_by_id;
  for (const auto& c : controls) controls_by_id[c.cbg_id] = &c;
  std::map<std::string, const mobility::RecoveryRow*> recovery_by_id;
  for (const auto& r : recovery) recovery_by_id[r.cbg_id] = &r;

  RegressionFrame frame;
  std::vector<double> y;
  std::vector<std::array<double, 10>> rows;
  for (std::size_t i = 0; i < index.size(); ++i) {
    const std::string& id = index.at(i).cbg_id;
    auto r = recovery_by_id.find(id);
    if (r == recovery_by_id.end()) {
      frame.excluded.push_back({0, id, "no recovery row"});
      continue;
    }
    if (!r->second->rr) {
      frame.excluded.push_back({0, id, "no recovery rate (" + mobility::to_string(r->second->status) + ")"});
      continue;
    }
    auto d = damage_by_id.find(id);
    if (d == damage_by_id.end()) {
      frame.excluded.push_back({0, id, "no damage metrics"});
      continue;
    }
    auto c = controls_by_id.find(id);
    if (c == controls_by_id.end()) {
      frame.excluded.push_back({0, id, "no control variables"});
      continue;
    }
    const auto& dm = *d->second;
    const auto& cv = *c->second;
    frame.cbg_ids.push_back(id);
    y.push_back(*r->second->rr);
    rows.push_back({static_cast<double>(dm.nc), dm.mp, dm.sdp, static_cast<double>(dm.mdp), cv.pop, cv.rd, cv.poi,
                    cv.ms, cv.is, cv.hmi});
  }

  const auto n = static_cast<Index>(rows.size());
  const auto m = static_cast<Index>(frame.names.size());
  frame.y = Eigen::Map<const Vector>(y.data(), n);
  frame.raw.resize(n, m);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) frame.raw(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  frame.x.resize(n, m);
  if (n == 0) return frame;
  for (Index j = 0; j < m; ++j) {
    auto scaled = covariates::min_max_scale(frame.raw.col(j));
    if (scaled.constant) frame.warnings.push_back("column '" + frame.names[static_cast<std::size_t>(j)] + "' is constant");
    frame.x.col(j) = scaled.values;
  }
  if (scale_response) {
    auto scaled = covariates::min_max_scale(frame.y);
    if (scaled.constant) frame.warnings.push_back("recovery rate is constant");
    frame.y = scaled.values;
  }
  return frame;
}

geo::Points frame_points(const ingest::CbgIndex& index, const RegressionFrame& frame) {
  const geo::Points all = index.planar_centroids();
  geo::Points out(frame.size(), 2);
  for (Index i = 0; i < frame.size(); ++i) {
    auto k = index.find(frame.cbg_ids[static_cast<std::size_t>(i)]);
    if (!k) throw InvalidArgument("frame CBG " + frame.cbg_ids[static_cast<std::size_t>(i)] + " is not in the index");
    out.row(i) = all.row(static_cast<Index>(*k));
  }
  return out;
}

void write_frame(std::ostream& out, const RegressionFrame& frame) {
  csv::Writer w(out);
  std::vector<std::string> header{"cbg_id", "rr"};
  for (const auto& name : frame.names) header.push_back(name);
  for (const auto& name : frame.names) header.push_back(name + "_scaled");
  w.row(header);
  for (Index i = 0; i < frame.size(); ++i) {
    std::vector<std::string> row{frame.cbg_ids[static_cast<std::size_t>(i)], csv::format_number(frame.y(i))};
    for (Index j = 0; j < frame.raw.cols(); ++j) row.push_back(csv::format_number(frame.raw(i, j)));
    for (Index j = 0; j < frame.x.cols(); ++j) row.push_back(csv::format_number(frame.x(i, j)));
    w.row(row);
  }
}

RegressionFrame read_frame(const csv::Table& table) {
  RegressionFrame frame;
  std::vector<std::string> required{"cbg_id", "rr"};
  for (const auto& name : frame.names) {
    required.push_back(name);
    required.push_back(name + "_scaled");
  }
  table.require_columns(required);
  const auto n = static_cast<Index>(table.size());
  const auto m = static_cast<Index>(frame.names.size());
  frame.y.resize(n);
  frame.raw.resize(n, m);
  frame.x.resize(n, m);
  auto number = [&](std::size_t r, const std::string& col) {
    auto v = csv::parse_double(table.at(r, col));
    if (!v) throw InvalidArgument("frame row " + std::to_string(r + 1) + ": unparsable '" + col + "'");
    return *v;
  };
  for (std::size_t r = 0; r < table.size(); ++r) {
    const auto i = static_cast<Index>(r);
    frame.cbg_ids.push_back(table.at(r, "cbg_id"));
    frame.y(i) = number(r, "rr");
    for (Index j = 0; j < m; ++j) {
      const auto& name = frame.names[static_cast<std::size_t>(j)];
      frame.raw(i, j) = number(r, name);
      frame.x(i, j) = number(r, name + "_scaled");
    }
  }
  return frame;
}

}  // namespace spillover::frame
