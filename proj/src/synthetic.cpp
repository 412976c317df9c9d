#include <spillover/covariates.hpp>
#include <spillover/damage.hpp>
#include <spillover/mobility.hpp>
#include <spillover/random.hpp>
#include <spillover/synthetic.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

namespace spillover::synthetic {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream purposes.
enum Stream : std::uint64_t {
  kPositions = 1,
  kField,
  kClaims,
  kCensus,
  kCounts,
  kBaselineTrips,
  kEventTrips,
  kNoise,
  kBridge,
  kFacilities,
};

constexpr double kBridgeIntercept = 0.5;
constexpr double kBridgeSlope = 0.95;
constexpr double kParcelSpacingMiles = 0.005;
constexpr int kParcelsPerRow = 20;
constexpr std::size_t kBridgePairs = 50;
constexpr double kHomeStopHours = 30.0;
constexpr double kVisitHours = 5.0;
constexpr double kLocalStopHours = 1.0;

std::string padded(std::size_t value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, value);
  return buf;
}

std::string cbg_id(std::size_t i) { return "48201" + padded(i + 1, 7); }

double round_to(double v, double unit) { return std::round(v / unit) * unit; }

struct Placement {
  double px, py;  // miles from the south-west corner
};

std::vector<Placement> place_cbgs(const ScenarioSpec& spec) {
  const auto n = static_cast<std::size_t>(spec.n);
  std::vector<Placement> out(n);
  if (spec.layout == Layout::lattice) {
    const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    const double spacing = spec.extent_miles / static_cast<double>(std::max<std::size_t>(side - 1, 1));
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = {static_cast<double>(i % side) * spacing, static_cast<double>(i / side) * spacing};
    }
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = make_rng(spec.seed, kPositions, i);
    const double px = uniform01(rng) * spec.extent_miles;
    const double py = uniform01(rng) * spec.extent_miles;
    out[i] = {px, py};
  }
  return out;
}

struct Georeference {
  double lon0, lat0, miles_per_deg_lon, miles_per_deg_lat, half_extent;

  explicit Georeference(const ScenarioSpec& spec)
      : lon0(spec.center_lon),
        lat0(spec.center_lat),
        miles_per_deg_lon(geo::kEarthRadiusMiles * std::numbers::pi / 180.0 *
                          std::cos(spec.center_lat * std::numbers::pi / 180.0)),
        miles_per_deg_lat(geo::kEarthRadiusMiles * std::numbers::pi / 180.0),
        half_extent(spec.extent_miles / 2.0) {}

  std::pair<double, double> lon_lat(double px, double py) const {
    return {lon0 + (px - half_extent) / miles_per_deg_lon, lat0 + (py - half_extent) / miles_per_deg_lat};
  }
};

Vector smooth_field(const ScenarioSpec& spec, const geo::Points& points) {
  const Index n = points.rows();
  Vector g(n);
  for (Index i = 0; i < n; ++i) {
    Rng rng = make_rng(spec.seed, kField, static_cast<std::uint64_t>(i));
    g(i) = std::normal_distribution<double>(0.0, 1.0)(rng);
  }
  Vector z = Vector::Zero(n);
  const double two_s2 = 2.0 * spec.field_scale_miles * spec.field_scale_miles;
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    double acc = 0.0;
    for (Index j = 0; j < n; ++j) acc += std::exp(-(points.row(i) - points.row(j)).squaredNorm() / two_s2) * g(j);
    z(i) = acc;
  }
  const double mean = z.mean();
  const double sd = std::sqrt((z.array() - mean).square().mean());
  if (!(sd > 0.0)) return Vector::Zero(n);
  return (z.array() - mean) / sd;
}

std::vector<ingest::AdjacencyPair> knn_adjacency(const std::vector<std::string>& ids, const geo::Points& points) {
  const Index n = points.rows();
  const Index k = std::min<Index>(5, n - 1);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (Index i = 0; i < n; ++i) {
    std::vector<std::pair<double, Index>> cand;
    for (Index j = 0; j < n; ++j) {
      if (j != i) cand.emplace_back((points.row(i) - points.row(j)).squaredNorm(), j);
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    for (Index m = 0; m < k; ++m) {
      const auto a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(cand[static_cast<std::size_t>(m)].second);
      edges.emplace_back(a, b);
      edges.emplace_back(b, a);
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  std::vector<ingest::AdjacencyPair> out;
  for (const auto& [a, b] : edges) out.emplace_back(ids[a], ids[b]);
  return out;
}

Timestamp at(Date d, int hour) { return Timestamp(d) + std::chrono::hours(hour); }

// Daily stops of one CBG's residents for the given visitor counts, starting at `first`.
void emit_daily_stops(const ScenarioSpec& spec, std::size_t cbg, const std::vector<std::string>& ids, Date first,
                      const std::vector<int>& visitors, Stream stream, std::vector<ingest::StopRecord>& out) {
  Rng rng = make_rng(spec.seed, stream, cbg);
  const std::size_t n = ids.size();
  std::uniform_int_distribution<std::size_t> other(0, n - 2);
  for (std::size_t t = 0; t < visitors.size(); ++t) {
    const Date day = first + std::chrono::days(static_cast<int>(t));
    for (int d = 0; d < spec.devices_per_cbg; ++d) {
      ingest::StopRecord s;
      s.device_id = ids[cbg] + "-D" + padded(static_cast<std::size_t>(d), 4);
      s.start = at(day, 9);
      if (d < visitors[t]) {
        std::size_t dest = other(rng);
        if (dest >= cbg) ++dest;
        s.cbg_id = ids[dest];
        s.dwell_hours = kVisitHours;
      } else {
        s.cbg_id = ids[cbg];
        s.dwell_hours = kLocalStopHours;
      }
      out.push_back(std::move(s));
    }
  }
}

}  // namespace

DateWindow ScenarioSpec::baseline_window() const {
  return {baseline_start, baseline_start + std::chrono::days(baseline_days - 1)};
}

DateWindow ScenarioSpec::event_window() const {
  const Date first = baseline_start + std::chrono::days(baseline_days);
  return {first, first + std::chrono::days(event_days - 1)};
}

DateWindow ScenarioSpec::study_window() const { return {baseline_window().first, event_window().last}; }

void validate(const ScenarioSpec& spec) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw InvalidArgument("infeasible scenario: " + what);
  };
  require(spec.n >= 10, "n must be at least 10");
  require(spec.extent_miles > 0.0, "extent must be positive");
  require(spec.radius_miles > 0.0 && spec.radius_miles <= spec.extent_miles, "radius must lie in (0, extent]");
  require(spec.sigma >= 0.0, "sigma must be nonnegative");
  require(spec.field_scale_miles > 0.0, "field scale must be positive");
  require(spec.claims_min >= 0 && spec.claims_mean >= 0.0 && spec.claims_sd >= 0.0, "claim parameters must be nonnegative");
  require(spec.ia_share >= 0.0 && spec.ia_share <= 1.0, "ia_share must lie in [0, 1]");
  require(spec.devices_per_cbg >= 1, "devices_per_cbg must be positive");
  require(spec.baseline_visit_share > 0.0 && spec.baseline_visit_share <= 1.0, "baseline_visit_share must lie in (0, 1]");
  require(spec.dip_depth >= 0.0 && spec.dip_depth <= 1.0, "dip_depth must lie in [0, 1]");
  require(spec.baseline_days >= 7, "baseline needs at least 7 days");
  require(spec.event_days >= 3, "event window needs at least 3 days");
  const auto& names = frame::regressor_names();
  for (const auto* m : {&spec.beta, &spec.theta}) {
    for (const auto& [name, value] : *m) {
      require(std::find(names.begin(), names.end(), name) != names.end(), "unknown regressor '" + name + "'");
      require(std::isfinite(value), "coefficients must be finite");
    }
  }
}

ScenarioSpec read_spec(std::istream& in) {
  const auto j = nlohmann::json::parse(in);
  ScenarioSpec s;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
  };
  get("seed", s.seed);
  get("n", s.n);
  if (j.contains("layout")) {
    const auto layout = j.at("layout").get<std::string>();
    if (layout == "uniform") {
      s.layout = Layout::uniform;
    } else if (layout == "lattice") {
      s.layout = Layout::lattice;
    } else {
      throw InvalidArgument("unknown layout '" + layout + "'");
    }
  }
  get("extent_miles", s.extent_miles);
  get("center_lon", s.center_lon);
  get("center_lat", s.center_lat);
  get("beta0", s.beta0);
  get("beta", s.beta);
  get("theta", s.theta);
  get("radius_miles", s.radius_miles);
  get("sigma", s.sigma);
  get("field_scale_miles", s.field_scale_miles);
  get("claims_mean", s.claims_mean);
  get("claims_sd", s.claims_sd);
  get("claims_min", s.claims_min);
  get("ia_share", s.ia_share);
  get("devices_per_cbg", s.devices_per_cbg);
  get("baseline_visit_share", s.baseline_visit_share);
  get("dip_depth", s.dip_depth);
  if (j.contains("baseline_start")) {
    auto d = parse_date(j.at("baseline_start").get<std::string>());
    if (!d) throw InvalidArgument("baseline_start must be YYYY-MM-DD");
    s.baseline_start = *d;
  }
  get("baseline_days", s.baseline_days);
  get("event_days", s.event_days);
  validate(s);
  return s;
}

void write_spec(std::ostream& out, const ScenarioSpec& s) {
  nlohmann::ordered_json j;
  j["seed"] = s.seed;
  j["n"] = s.n;
  j["layout"] = s.layout == Layout::uniform ? "uniform" : "lattice";
  j["extent_miles"] = s.extent_miles;
  j["center_lon"] = s.center_lon;
  j["center_lat"] = s.center_lat;
  j["beta0"] = s.beta0;
  j["beta"] = s.beta;
  j["theta"] = s.theta;
  j["radius_miles"] = s.radius_miles;
  j["sigma"] = s.sigma;
  j["field_scale_miles"] = s.field_scale_miles;
  j["claims_mean"] = s.claims_mean;
  j["claims_sd"] = s.claims_sd;
  j["claims_min"] = s.claims_min;
  j["ia_share"] = s.ia_share;
  j["devices_per_cbg"] = s.devices_per_cbg;
  j["baseline_visit_share"] = s.baseline_visit_share;
  j["dip_depth"] = s.dip_depth;
  j["baseline_start"] = format_date(s.baseline_start);
  j["baseline_days"] = s.baseline_days;
  j["event_days"] = s.event_days;
  out << j.dump(2) << '\n';
}

Scenario generate_scenario(const ScenarioSpec& spec) {
  validate(spec);
  Scenario sc;
  sc.spec = spec;
  auto& data = sc.data;
  const auto n = static_cast<std::size_t>(spec.n);
  const Georeference geo_ref(spec);

  // Geometry.
  const auto placements = place_cbgs(spec);
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    ids[i] = cbg_id(i);
    Rng rng = make_rng(spec.seed, kCounts, i);
    const auto [lon, lat] = geo_ref.lon_lat(placements[i].px, placements[i].py);
    const double area = round_to(std::uniform_real_distribution<double>(0.2, 3.0)(rng), 0.001);
    data.cbgs.push_back({ids[i], lon, lat, area});
  }
  const ingest::CbgIndex index0(data.cbgs);
  const geo::Points points = index0.planar_centroids();
  data.adjacency = knn_adjacency(ids, points);
  const ingest::CbgIndex index(data.cbgs, data.adjacency);

  // Claims on parcels; counts follow the smoothed field.
  const Vector field = smooth_field(spec, points);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = make_rng(spec.seed, kClaims, i);
    const long count = std::max<long>(spec.claims_min, std::lround(spec.claims_mean + spec.claims_sd * field(static_cast<Index>(i))));
    std::uniform_real_distribution<double> market(80000.0, 400000.0), pde(0.05, 0.95);
    for (long k = 0; k < count; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      const double px = placements[i].px + kParcelSpacingMiles * static_cast<double>(kk % kParcelsPerRow);
      const double py = placements[i].py + kParcelSpacingMiles * static_cast<double>(kk / kParcelsPerRow);
      const auto [lon, lat] = geo_ref.lon_lat(px, py);
      ingest::ParcelRecord parcel{ids[i] + "-P" + padded(kk, 4), lon, lat, std::round(market(rng)), ids[i]};
      const double nfip_amount = round_to(pde(rng) * parcel.market_value, 0.01);
      const bool ia = uniform01(rng) < spec.ia_share;
      ingest::ClaimRecord claim;
      claim.claim_id = "C" + padded(i + 1, 7) + "-" + padded(kk, 4);
      claim.source = ia ? ingest::ClaimSource::IA : ingest::ClaimSource::NFIP;
      claim.lon = lon;
      claim.lat = lat;
      claim.amount = ia ? round_to(std::exp((std::log(nfip_amount) - kBridgeIntercept) / kBridgeSlope), 0.01) : nfip_amount;
      claim.parcel_hint = parcel.parcel_id;
      data.parcels.push_back(std::move(parcel));
      data.claims.push_back(std::move(claim));
    }
  }
  {
    Rng rng = make_rng(spec.seed, kBridge, 0);
    std::uniform_real_distribution<double> ia(1000.0, 100000.0);
    for (std::size_t p = 0; p < kBridgePairs; ++p) {
      const double a = round_to(ia(rng), 0.01);
      data.bridge_pairs.push_back({a, std::exp(kBridgeIntercept) * std::pow(a, kBridgeSlope)});
    }
  }

  // Census and facility counts.
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = make_rng(spec.seed, kCensus, i);
    ingest::CensusRecord c;
    c.cbg_id = ids[i];
    c.tract_id = "48201" + padded(i / 4 + 1, 6);
    c.pop_total = static_cast<double>(std::uniform_int_distribution<int>(500, 3000)(rng));
    const double white = std::uniform_real_distribution<double>(0.2, 0.7)(rng);
    const double black = std::uniform_real_distribution<double>(0.05, 0.4)(rng) * (1.0 - white);
    const double asian = std::uniform_real_distribution<double>(0.01, 0.1)(rng);
    c.pop_nhwhite = std::round(white * c.pop_total);
    c.pop_nhblack = std::round(black * c.pop_total);
    c.pop_nhasian = std::round(asian * c.pop_total);
    for (auto& q : c.income_quartiles) q = static_cast<double>(std::uniform_int_distribution<int>(20, 300)(rng));
    data.census.push_back(c);

    Rng counts = make_rng(spec.seed, kFacilities, i);
    data.poi.push_back({ids[i], static_cast<double>(std::uniform_int_distribution<int>(0, 40)(counts))});
    data.roads.push_back({ids[i], static_cast<double>(std::uniform_int_distribution<int>(5, 200)(counts))});
  }

  // Baseline mobility: homes plus a fixed share of visitors every day.
  const DateWindow baseline = spec.baseline_window();
  const DateWindow event = spec.event_window();
  const int v_b = std::max(1, static_cast<int>(std::lround(spec.baseline_visit_share * spec.devices_per_cbg)));
  std::vector<std::vector<ingest::StopRecord>> baseline_stops(n);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    auto& out = baseline_stops[i];
    for (int d = 0; d < spec.devices_per_cbg; ++d) {
      out.push_back({ids[i] + "-D" + padded(static_cast<std::size_t>(d), 4), ids[i], at(baseline.first, 1), kHomeStopHours});
    }
    emit_daily_stops(spec, i, ids, baseline.first, std::vector<int>(static_cast<std::size_t>(baseline.days()), v_b),
                     kBaselineTrips, out);
  }
  for (auto& s : baseline_stops) std::move(s.begin(), s.end(), std::back_inserter(data.stops));

  // Realized regressors, exactly as the pipeline derives them.
  const auto matches = damage::match_claims_to_parcels(data.claims, data.parcels);
  const auto bridge = damage::fit_ia_nfip_bridge(data.bridge_pairs);
  const auto pde = damage::compute_pde(data.claims, data.parcels, matches, bridge);
  const auto damage_rows = damage::aggregate_cbg_damage(pde, index);
  const auto controls = covariates::compute_controls(index, data.census, data.poi, data.roads,
                                                     covariates::count_visits(data.stops, baseline));
  std::vector<mobility::RecoveryRow> placeholder;
  for (const auto& id : ids) placeholder.push_back({id, std::nullopt, std::nullopt, 0.0, std::nullopt, mobility::RecoveryStatus::recovered});
  const auto fr = frame::assemble_frame(index, damage_rows, controls.rows, placeholder);

  auto& truth = sc.truth;
  truth.cbg_ids = fr.cbg_ids;
  truth.names = fr.names;
  truth.points = frame::frame_points(index, fr);
  truth.x = fr.x;
  const Index m = static_cast<Index>(truth.names.size());
  truth.beta = Vector::Zero(m);
  truth.theta = Vector::Zero(m);
  for (const auto& [name, v] : spec.beta) truth.beta(fr.column(name)) = v;
  for (const auto& [name, v] : spec.theta) truth.theta(fr.column(name)) = v;
  const auto w_r = weights::build_weights(truth.points, weights::Scheme::thresholded(spec.radius_miles));
  truth.wx = weights::spatial_lag(w_r, truth.x);
  truth.y = (truth.x * truth.beta + truth.wx * truth.theta).array() + spec.beta0;
  if (spec.sigma > 0.0) {
    for (Index i = 0; i < truth.y.size(); ++i) {
      Rng rng = make_rng(spec.seed, kNoise, static_cast<std::uint64_t>(i));
      truth.y(i) += spec.sigma * std::normal_distribution<double>(0.0, 1.0)(rng);
    }
  }

  // Event mobility realizing each planted rate: trough, then one rise of y (if it is a steady
  // step) or two days' worth of rise followed by a flat day.
  const int v_trough = static_cast<int>(std::lround(v_b * (1.0 - spec.dip_depth)));
  std::vector<std::vector<int>> schedule(n, std::vector<int>(static_cast<std::size_t>(event.days()), v_b));
  for (Index r = 0; r < truth.y.size(); ++r) {
    const auto i = *index.find(truth.cbg_ids[static_cast<std::size_t>(r)]);
    const double y = truth.y(r);
    if (!(y >= 0.0)) {
      throw InvalidArgument("infeasible scenario: planted recovery rate " + std::to_string(y) + " at CBG " +
                            ids[i] + " is negative");
    }
    const int single = static_cast<int>(std::lround(y * v_b));
    const int rise = 10 * single < v_b ? single : static_cast<int>(std::lround(2.0 * y * v_b));
    if (v_trough + rise > spec.devices_per_cbg) {
      throw InvalidArgument("infeasible scenario: planted recovery rate " + std::to_string(y) + " at CBG " + ids[i] +
                            " exceeds the resident capacity");
    }
    auto& s = schedule[i];
    s[0] = v_trough;
    for (std::size_t t = 1; t < s.size(); ++t) s[t] = v_trough + rise;
  }
  std::vector<std::vector<ingest::StopRecord>> event_stops(n);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) emit_daily_stops(spec, i, ids, event.first, schedule[i], kEventTrips, event_stops[i]);
  for (auto& s : event_stops) std::move(s.begin(), s.end(), std::back_inserter(data.stops));

  // Realized recovery rates through the mobility stage.
  const auto homes = mobility::detect_home_cbgs(data.stops);
  const auto series = mobility::compute_daily_movement(data.stops, homes, spec.study_window());
  std::map<std::string, double> realized;
  for (const auto& s : series) {
    const auto r = mobility::compute_recovery_rate(s, baseline, event);
    if (r.rr) realized[s.cbg_id] = *r.rr;
  }
  truth.realized_rr = Vector::Constant(truth.y.size(), kNaN);
  for (Index r = 0; r < truth.y.size(); ++r) {
    auto it = realized.find(truth.cbg_ids[static_cast<std::size_t>(r)]);
    if (it != realized.end()) truth.realized_rr(r) = it->second;
  }

  // Decay field at the planted radius.
  const Vector nc = truth.x.col(fr.column("nc"));
  const Vector weighted = w_r.matrix() * nc;
  const double rr0 = truth.y.maxCoeff();
  truth.k = Vector::Constant(truth.y.size(), kNaN);
  for (Index r = 0; r < truth.y.size(); ++r) {
    if (auto k = spatial_analysis::decay_coefficient(rr0, truth.y(r), weighted(r))) truth.k(r) = *k;
  }
  return sc;
}

void write_ground_truth(std::ostream& out, const GroundTruth& truth) {
  csv::Writer w(out);
  std::vector<std::string> header{"cbg_id", "px", "py", "y", "realized_rr", "k"};
  for (const auto& name : truth.names) header.push_back("x_" + name);
  for (const auto& name : truth.names) header.push_back("wx_" + name);
  w.row(header);
  for (Index i = 0; i < truth.y.size(); ++i) {
    std::vector<std::string> row{truth.cbg_ids[static_cast<std::size_t>(i)], csv::format_number(truth.points(i, 0)),
                                 csv::format_number(truth.points(i, 1)), csv::format_number(truth.y(i)),
                                 std::isnan(truth.realized_rr(i)) ? "" : csv::format_number(truth.realized_rr(i)),
                                 std::isnan(truth.k(i)) ? "" : csv::format_number(truth.k(i))};
    for (Index j = 0; j < truth.x.cols(); ++j) row.push_back(csv::format_number(truth.x(i, j)));
    for (Index j = 0; j < truth.wx.cols(); ++j) row.push_back(csv::format_number(truth.wx(i, j)));
    w.row(row);
  }
}

void write_scenario(const Scenario& sc, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw Error("cannot write " + (dir / name).string());
    return f;
  };
  const auto& d = sc.data;
  { auto f = open("cbgs.csv"); ingest::write_cbgs(f, d.cbgs); }
  { auto f = open("adjacency.csv"); ingest::write_adjacency(f, d.adjacency); }
  { auto f = open("parcels.csv"); ingest::write_parcels(f, d.parcels); }
  { auto f = open("claims.csv"); ingest::write_claims(f, d.claims); }
  { auto f = open("bridge_pairs.csv"); ingest::write_bridge_pairs(f, d.bridge_pairs); }
  { auto f = open("stops.csv"); ingest::write_stops(f, d.stops); }
  { auto f = open("census.csv"); ingest::write_census(f, d.census); }
  { auto f = open("poi.csv"); ingest::write_counts(f, "poi_count", d.poi); }
  { auto f = open("roads.csv"); ingest::write_counts(f, "segment_count", d.roads); }
  { auto f = open("scenario.json"); write_spec(f, sc.spec); }
  { auto f = open("ground_truth.csv"); write_ground_truth(f, sc.truth); }
}

double moran_double_sum(const Vector& x, const Matrix& w) {
  const Index n = x.size();
  const double mean = x.sum() / static_cast<double>(n);
  double num = 0.0, den = 0.0, s0 = 0.0;
  for (Index i = 0; i < n; ++i) {
    den += (x(i) - mean) * (x(i) - mean);
    for (Index j = 0; j < n; ++j) {
      num += w(i, j) * (x(i) - mean) * (x(j) - mean);
      s0 += w(i, j);
    }
  }
  return static_cast<double>(n) / s0 * num / den;
}

Vector ols_normal_equations(const Vector& y, const Matrix& design) {
  const Matrix xtx = design.transpose() * design;
  return xtx.ldlt().solve(design.transpose() * y);
}

Matrix dense_lag(const Matrix& w, const Matrix& x) {
  Matrix out = Matrix::Zero(w.rows(), x.cols());
  for (Index i = 0; i < w.rows(); ++i) {
    for (Index j = 0; j < w.cols(); ++j) {
      for (Index c = 0; c < x.cols(); ++c) out(i, c) += w(i, j) * x(j, c);
    }
  }
  return out;
}

OracleReport oracle_checks(const frame::RegressionFrame& fr, const weights::SpatialWeights& w,
                           const econometrics::RegressionFit& ols, const econometrics::SlxFit& slx,
                           double moran_statistic, const spatial_analysis::DecayField& decay) {
  const Index n = fr.size();
  if (n > kMaxOracleSize) throw InvalidArgument("oracle checks are limited to " + std::to_string(kMaxOracleSize) + " rows");
  OracleReport report;
  report.n = n;
  const Matrix wd = Matrix(w.matrix());
  report.moran_deviation = std::abs(moran_double_sum(fr.y, wd) - moran_statistic);

  Matrix design(n, fr.x.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(fr.x.cols()) = fr.x;
  report.ols_deviation = (ols_normal_equations(fr.y, design) - ols.coefficients).cwiseAbs().maxCoeff();

  const Matrix lag_dense = dense_lag(wd, fr.x);
  const Matrix lag_sparse = w.matrix() * fr.x;
  report.lag_deviation = (lag_dense - lag_sparse).cwiseAbs().maxCoeff();

  std::vector<Index> kept;
  for (const auto& name : slx.fit.names) {
    if (name.starts_with("W_")) kept.push_back(fr.column(name.substr(2)));
  }
  Matrix slx_design(n, design.cols() + static_cast<Index>(kept.size()));
  slx_design.leftCols(design.cols()) = design;
  for (std::size_t c = 0; c < kept.size(); ++c) slx_design.col(design.cols() + static_cast<Index>(c)) = lag_dense.col(kept[c]);
  report.slx_deviation = (ols_normal_equations(fr.y, slx_design) - slx.fit.coefficients).cwiseAbs().maxCoeff();

  for (const auto& e : decay.entries) {
    if (!e.k) continue;
    const double back = decay.rr0 / (1.0 + *e.k * e.weighted_damage);
    report.decay_identity_residual = std::max(report.decay_identity_residual, std::abs(back - e.rr));
  }
  return report;
}

void write_oracle_report(std::ostream& out, const OracleReport& r) {
  nlohmann::ordered_json j;
  j["n"] = r.n;
  j["moran_deviation"] = r.moran_deviation;
  j["ols_deviation"] = r.ols_deviation;
  j["slx_deviation"] = r.slx_deviation;
  j["lag_deviation"] = r.lag_deviation;
  j["decay_identity_residual"] = r.decay_identity_residual;
  out << j.dump(2) << '\n';
}

}  // namespace spillover::synthetic
