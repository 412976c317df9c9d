#include <spillover/csv.hpp>
#include <spillover/spatial_analysis.hpp>

#include <boost/math/distributions/fisher_f.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace spillover::spatial_analysis {

std::vector<double> ThresholdGrid::values() const {
  if (!(step > 0.0)) throw InvalidArgument("threshold grid step must be positive");
  if (!(stop >= start) || start < 0.0) throw InvalidArgument("threshold grid needs 0 <= start <= stop");
  const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = start + static_cast<double>(i) * step;
  return out;
}

namespace {

std::vector<Index> focal_columns(const std::vector<std::string>& names, const std::vector<std::string>& focal) {
  std::vector<Index> cols;
  if (focal.empty()) {
    for (std::size_t j = 0; j < names.size(); ++j) cols.push_back(static_cast<Index>(j));
    return cols;
  }
  for (const auto& f : focal) {
    auto it = std::find(names.begin(), names.end(), f);
    if (it == names.end()) throw InvalidArgument("unknown focal variable '" + f + "'");
    cols.push_back(static_cast<Index>(it - names.begin()));
  }
  return cols;
}

}  // namespace

ReachProfile sweep_spatial_reach(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Matrix>& x,
                                 const geo::Points& points, const std::vector<std::string>& names,
                                 const SweepOptions& options) {
  if (static_cast<Index>(names.size()) != x.cols()) throw InvalidArgument("sweep: one name per regressor");
  if (x.rows() != y.size() || points.rows() != y.size()) throw InvalidArgument("sweep: inputs differ in length");
  const std::vector<double> grid = options.grid.values();
  const std::vector<Index> focal = focal_columns(names, options.focal);

  ReachProfile profile;
  profile.distance_power = options.distance_power;
  for (Index c : focal) profile.variables.push_back(names[static_cast<std::size_t>(c)]);
  profile.points.resize(grid.size());

  const weights::DistanceNeighbors neighbors(points, grid.back());
  const Matrix x_block = x;

  int chunks = 1;
#ifdef _OPENMP
  chunks = std::max(1, omp_get_max_threads());
#endif
  chunks = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(chunks), grid.size()));

#pragma omp parallel for schedule(static, 1)
  for (int c = 0; c < chunks; ++c) {
    const std::size_t begin = grid.size() * static_cast<std::size_t>(c) / static_cast<std::size_t>(chunks);
    const std::size_t end = grid.size() * static_cast<std::size_t>(c + 1) / static_cast<std::size_t>(chunks);
    weights::ThresholdLagger lagger(neighbors, x_block, options.distance_power);
    for (std::size_t t = begin; t < end; ++t) {
      ReachPoint& point = profile.points[t];
      point.distance = grid[t];
      lagger.advance_to(grid[t]);
      point.isolates = lagger.isolate_count();
      if (lagger.total_neighbors() == 0) {
        point.skipped = true;
        point.skip_reason = "empty weights";
        continue;
      }
      try {
        const Matrix lag = lagger.lag();
        const econometrics::SlxFit slx = econometrics::fit_slx_with_lags(y, x_block, lag, names);
        point.log_likelihood = slx.fit.log_likelihood;
        point.r_squared = slx.fit.r_squared;
        for (Index col : focal) point.effects.push_back(slx.effects[static_cast<std::size_t>(col)]);
      } catch (const RankDeficient&) {
        point.skipped = true;
        point.skip_reason = "rank deficient";
      } catch (const std::exception& e) {
        point.skipped = true;
        point.skip_reason = e.what();
      }
    }
  }
  return profile;
}

std::string to_string(Extremum e) { return e == Extremum::minimum ? "min" : "max"; }

ReachSummary locate_cutoff_and_extremum(const ReachProfile& profile, const std::string& variable,
                                        Extremum orientation, double alpha) {
  if (profile.points.empty()) throw InvalidArgument("empty reach profile");
  auto it = std::find(profile.variables.begin(), profile.variables.end(), variable);
  if (it == profile.variables.end()) throw InvalidArgument("variable '" + variable + "' is not in the profile");
  const auto v = static_cast<std::size_t>(it - profile.variables.begin());

  ReachSummary summary;
  summary.variable = variable;
  summary.orientation = orientation;
  for (const auto& point : profile.points) {
    if (point.skipped) continue;
    const auto& e = point.effects[v];
    if (e.lag_dropped) continue;
    if (e.p_indirect <= alpha) summary.cutoff_distance = point.distance;
    const bool better = !summary.extremum_effect ||
                        (orientation == Extremum::minimum ? e.indirect < *summary.extremum_effect
                                                          : e.indirect > *summary.extremum_effect);
    if (better) {
      summary.extremum_effect = e.indirect;
      summary.extremum_distance = point.distance;
    }
  }
  return summary;
}

std::optional<double> best_fit_distance(const ReachProfile& profile) {
  std::optional<double> best;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (const auto& point : profile.points) {
    if (!point.skipped && point.log_likelihood > best_ll) {
      best_ll = point.log_likelihood;
      best = point.distance;
    }
  }
  return best;
}

void write_reach_profile(std::ostream& out, const ReachProfile& profile) {
  csv::Writer writer(out);
  writer.row({"D", "variable", "direct", "indirect", "total", "p_indirect", "skipped"});
  for (const auto& point : profile.points) {
    const std::string d = csv::format_number(point.distance);
    for (std::size_t v = 0; v < profile.variables.size(); ++v) {
      if (point.skipped) {
        writer.row({d, profile.variables[v], "", "", "", "", point.skip_reason});
        continue;
      }
      const auto& e = point.effects[v];
      writer.row({d, profile.variables[v], csv::format_number(e.direct), csv::format_number(e.indirect),
                  csv::format_number(e.total), e.lag_dropped ? "" : csv::format_number(e.p_indirect), ""});
    }
  }
}

std::string to_string(DamageSubscript s) { return s == DamageSubscript::neighbor ? "neighbor" : "own"; }

std::optional<DamageSubscript> parse_damage_subscript(std::string_view text) {
  if (text == "neighbor") return DamageSubscript::neighbor;
  if (text == "own") return DamageSubscript::own;
  return std::nullopt;
}

std::optional<double> decay_coefficient(double rr0, double rr, double weighted_damage) {
  if (rr == 0.0 || weighted_damage == 0.0) return std::nullopt;
  return (rr0 - rr) / (rr * weighted_damage);
}

std::size_t DecayField::included() const {
  return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const DecayEntry& e) { return e.k.has_value(); }));
}

DecayField compute_decay_coefficients(const std::vector<std::string>& cbg_ids, const Eigen::Ref<const Vector>& rr,
                                      const Eigen::Ref<const Vector>& damage, const weights::SpatialWeights& w,
                                      std::string damage_feature, DamageSubscript subscript) {
  const Index n = rr.size();
  if (n == 0) throw InvalidArgument("decay needs a nonempty recovery-rate field");
  if (damage.size() != n || w.size() != n || static_cast<Index>(cbg_ids.size()) != n) {
    throw InvalidArgument("decay inputs differ in length");
  }
  DecayField field;
  field.rr0 = rr.maxCoeff();
  field.damage_feature = std::move(damage_feature);
  field.subscript = subscript;

  Vector weighted;
  if (subscript == DamageSubscript::neighbor) {
    weighted = w.matrix() * damage;
  } else {
    const Vector row_sums = w.matrix() * Vector::Ones(n);
    weighted = row_sums.cwiseProduct(damage);
  }
  for (Index i = 0; i < n; ++i) {
    DecayEntry e;
    e.cbg_id = cbg_ids[static_cast<std::size_t>(i)];
    e.rr = rr(i);
    e.weighted_damage = weighted(i);
    if (rr(i) == 0.0) {
      e.excluded_reason = "zero recovery rate";
    } else if (weighted(i) == 0.0) {
      e.excluded_reason = "zero weighted damage";
    } else {
      e.k = decay_coefficient(field.rr0, rr(i), weighted(i));
    }
    field.entries.push_back(std::move(e));
  }
  return field;
}

void write_decay(std::ostream& out, const DecayField& field) {
  csv::Writer writer(out);
  writer.row({"cbg_id", "k", "excluded_reason"});
  for (const auto& e : field.entries) {
    writer.row({e.cbg_id, e.k ? csv::format_number(*e.k) : "", e.excluded_reason});
  }
}

EmpiricalCdf::EmpiricalCdf(std::vector<double> sample) : n_(sample.size()) {
  std::sort(sample.begin(), sample.end());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    if (i + 1 < sample.size() && sample[i + 1] == sample[i]) continue;
    support_.push_back(sample[i]);
    probabilities_.push_back(static_cast<double>(i + 1) / static_cast<double>(n_));
  }
}

double EmpiricalCdf::operator()(double x) const {
  const auto it = std::upper_bound(support_.begin(), support_.end(), x);
  if (it == support_.begin()) return 0.0;
  return probabilities_[static_cast<std::size_t>(it - support_.begin()) - 1];
}

AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw InvalidArgument("ANOVA needs at least two groups");
  std::size_t total = 0;
  double grand = 0.0;
  for (const auto& g : groups) {
    if (g.empty()) throw InvalidArgument("ANOVA group is empty");
    total += g.size();
    for (double v : g) grand += v;
  }
  if (total <= groups.size()) throw InvalidArgument("ANOVA needs within-group degrees of freedom");
  grand /= static_cast<double>(total);

  double ssb = 0.0, ssw = 0.0;
  for (const auto& g : groups) {
    double mean = 0.0;
    for (double v : g) mean += v;
    mean /= static_cast<double>(g.size());
    ssb += static_cast<double>(g.size()) * (mean - grand) * (mean - grand);
    for (double v : g) ssw += (v - mean) * (v - mean);
  }
  AnovaResult r;
  r.df_between = static_cast<double>(groups.size() - 1);
  r.df_within = static_cast<double>(total - groups.size());
  const double msb = ssb / r.df_between;
  const double msw = ssw / r.df_within;
  if (msb == 0.0) {
    r.f = 0.0;
    r.p_value = 1.0;
  } else if (msw == 0.0) {
    r.f = std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
  } else {
    r.f = msb / msw;
    boost::math::fisher_f dist(r.df_between, r.df_within);
    r.p_value = boost::math::cdf(boost::math::complement(dist, r.f));
  }
  return r;
}

HeterogeneityResult heterogeneity_test(const Eigen::Ref<const Vector>& k, const Eigen::Ref<const Vector>& feature,
                                       std::string feature_name) {
  if (k.size() != feature.size()) throw InvalidArgument("heterogeneity inputs differ in length");
  if (k.size() == 0) throw InvalidArgument("heterogeneity test needs data");
  HeterogeneityResult r;
  r.feature = std::move(feature_name);
  r.split_value = feature.mean();
  std::vector<double> low, high;
  for (Index i = 0; i < k.size(); ++i) (feature(i) > r.split_value ? high : low).push_back(k(i));
  if (low.empty() || high.empty()) {
    throw InvalidArgument("mean split of '" + r.feature + "' leaves an empty group");
  }
  r.anova = one_way_anova({low, high});
  auto summarize = [](std::string label, std::vector<double> values) {
    GroupSummary g;
    g.label = std::move(label);
    g.size = values.size();
    double s = 0.0;
    for (double v : values) s += v;
    g.mean_k = s / static_cast<double>(values.size());
    g.cdf = EmpiricalCdf(std::move(values));
    return g;
  };
  r.low = summarize("low", std::move(low));
  r.high = summarize("high", std::move(high));
  return r;
}

void write_heterogeneity(std::ostream& out, const std::vector<HeterogeneityResult>& results,
                         const std::vector<std::pair<std::string, std::string>>& failures) {
  using nlohmann::ordered_json;
  auto group_json = [](const GroupSummary& g) {
    ordered_json j;
    j["label"] = g.label;
    j["size"] = g.size;
    j["mean_k"] = g.mean_k;
    j["cdf"] = {{"k", g.cdf.support()}, {"p", g.cdf.probabilities()}};
    return j;
  };
  ordered_json doc;
  doc["tests"] = ordered_json::array();
  for (const auto& r : results) {
    ordered_json j;
    j["feature"] = r.feature;
    j["split_value"] = r.split_value;
    j["groups"] = {group_json(r.low), group_json(r.high)};
    j["anova"] = {{"f", r.anova.f},
                  {"df_between", r.anova.df_between},
                  {"df_within", r.anova.df_within},
                  {"p_value", r.anova.p_value}};
    doc["tests"].push_back(std::move(j));
  }
  doc["failures"] = ordered_json::array();
  for (const auto& [feature, reason] : failures) doc["failures"].push_back({{"feature", feature}, {"reason", reason}});
  out << doc.dump(2) << '\n';
}

}  // namespace spillover::spatial_analysis
