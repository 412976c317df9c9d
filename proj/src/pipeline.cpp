#include <spillover/covariates.hpp>
#include <spillover/csv.hpp>
#include <spillover/damage.hpp>
#include <spillover/frame.hpp>
#include <spillover/ingest.hpp>
#include <spillover/mobility.hpp>
#include <spillover/pipeline.hpp>
#include <spillover/random.hpp>
#include <spillover/synthetic.hpp>

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace spillover::pipeline {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// A stage could not complete for reasons other than configuration or missing inputs.
class StageFailure : public Error {
 public:
  using Error::Error;
};

std::string hex(const unsigned char* data, unsigned len) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(digits[data[i] >> 4]);
    out.push_back(digits[data[i] & 0xF]);
  }
  return out;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationFailure("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

std::string sha256(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  return hex(digest, len);
}

std::string sha256_file(const fs::path& path) { return sha256(read_bytes(path)); }

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages{Stage::ingest,     Stage::damage,     Stage::mobility, Stage::covariates,
                                         Stage::regression, Stage::sweep,      Stage::decay,    Stage::heterogeneity};
  return stages;
}

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::ingest: return "ingest";
    case Stage::damage: return "damage";
    case Stage::mobility: return "mobility";
    case Stage::covariates: return "covariates";
    case Stage::regression: return "regression";
    case Stage::sweep: return "sweep";
    case Stage::decay: return "decay";
    case Stage::heterogeneity: return "heterogeneity";
  }
  return "ingest";
}

std::optional<Stage> parse_stage(std::string_view text) {
  for (Stage s : all_stages()) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------------------------
// Configuration

namespace {

const std::map<std::string, std::string>& config_notes() {
  static const std::map<std::string, std::string> notes{
      {"baseline_window", "normal-period dates; weekday means of the movement rate form the baseline"},
      {"event_window", "dates searched for the trough and the new steady state"},
      {"hmi_window", "stop window for the human mobility index; null uses the baseline window"},
      {"hmi_days", "HMI divisor: total visits over a 28-day normal period"},
      {"home_dwell_hours", "home CBG: a stop longer than 24 hours"},
      {"visit_dwell_hours", "a visit: a stop of at least 4 hours in another CBG"},
      {"steady_tolerance", "new steady state: day-over-day percent change within 0.10"},
      {"perturbation_floor", "minimum percent change above -0.05 means no perturbation (artifact choice)"},
      {"max_interpolated_gap", "longest interior data gap filled linearly, in days (artifact choice)"},
      {"pde_cap", "damage extent ratios above this are capped and flagged (artifact choice)"},
      {"match_max_distance_miles", "claim-to-parcel nearest-centroid radius (artifact choice)"},
      {"weight_scheme", "inverse geographical distance, row standardized"},
      {"robustness_schemes", "shared boundary, k nearest neighbors (k = 5), inverse square distance"},
      {"scale_response", "min-max scale the recovery rate as well as the regressors"},
      {"sweep", "thresholds at 0.1-mile intervals up to 70 miles"},
      {"alpha", "cut-off: indirect effect significant at least at the 10% level"},
      {"decay", "damage feature is the scaled number of claims; W at the reach distance"},
      {"heterogeneity_features", "groups split at the feature mean, compared by one-way ANOVA"},
      {"permutations", "999 permutations make 0.001 the smallest attainable p-value"},
      {"seed", "permutation test seed"},
      {"significance", "table: 1%/5%/10% for ***/**/*; strict: 0.1%/1%/5%"},
  };
  return notes;
}

ordered_json window_json(const DateWindow& w) { return {{"first", format_date(w.first)}, {"last", format_date(w.last)}}; }

DateWindow parse_window(const json& j, const std::string& key) {
  if (!j.is_object() || !j.contains("first") || !j.contains("last")) {
    throw ValidationFailure(key + " needs 'first' and 'last' dates");
  }
  auto first = parse_date(j.at("first").get<std::string>());
  auto last = parse_date(j.at("last").get<std::string>());
  if (!first || !last) throw ValidationFailure(key + " dates must be YYYY-MM-DD");
  return {*first, *last};
}

weights::Scheme parse_scheme_or_throw(const std::string& text) {
  auto s = weights::parse_scheme(text);
  if (!s) throw ValidationFailure("unknown weight scheme '" + text + "'");
  return *s;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

void validate(const PipelineConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ValidationFailure("invalid configuration: " + what);
  };
  require(!c.inputs.cbgs.empty(), "inputs.cbgs is required");
  require(c.baseline.first <= c.baseline.last, "baseline_window is reversed");
  require(c.event.first <= c.event.last, "event_window is reversed");
  require(c.baseline.last < c.event.first, "baseline_window must end before event_window starts");
  if (c.hmi_window) require(c.hmi_window->first <= c.hmi_window->last, "hmi_window is reversed");
  require(c.hmi_days > 0, "hmi_days must be positive");
  require(c.home_dwell_hours > 0.0 && c.visit_dwell_hours > 0.0, "dwell thresholds must be positive");
  require(c.steady_tolerance > 0.0 && c.perturbation_floor > 0.0, "recovery thresholds must be positive");
  require(c.max_interpolated_gap >= 0, "max_interpolated_gap must be nonnegative");
  require(c.pde_cap > 0.0 && c.match_max_distance_miles > 0.0, "pde_cap and match distance must be positive");
  require(c.sweep_grid.step > 0.0, "sweep step must be positive");
  require(c.sweep_grid.start > 0.0 && c.sweep_grid.stop >= c.sweep_grid.start, "sweep needs 0 < start <= stop");
  require(c.alpha > 0.0 && c.alpha < 1.0, "alpha must lie in (0, 1)");
  require(c.permutations >= 0, "permutations must be nonnegative");
  const auto& names = frame::regressor_names();
  auto known = [&](const std::string& n) { return std::find(names.begin(), names.end(), n) != names.end(); };
  require(known(c.decay_feature), "decay feature '" + c.decay_feature + "' is not a regressor");
  require(known(c.reach_variable), "reach variable '" + c.reach_variable + "' is not a regressor");
  for (const auto& f : c.sweep_focal) require(known(f), "sweep focal '" + f + "' is not a regressor");
  if (!c.sweep_focal.empty()) {
    require(std::find(c.sweep_focal.begin(), c.sweep_focal.end(), c.reach_variable) != c.sweep_focal.end(),
            "reach variable must be among the sweep focal variables");
  }
  for (const auto& f : c.heterogeneity_features) require(known(f), "heterogeneity feature '" + f + "' is not a regressor");
}

PipelineConfig read_config(std::istream& in, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationFailure(std::string("config is not valid JSON: ") + e.what());
  }
  static const std::set<std::string> known{"inputs",
                                           "output_dir",
                                           "baseline_window",
                                           "event_window",
                                           "hmi_window",
                                           "hmi_days",
                                           "home_dwell_hours",
                                           "visit_dwell_hours",
                                           "steady_tolerance",
                                           "perturbation_floor",
                                           "max_interpolated_gap",
                                           "pde_cap",
                                           "match_max_distance_miles",
                                           "weight_scheme",
                                           "robustness_schemes",
                                           "scale_response",
                                           "sweep",
                                           "alpha",
                                           "decay",
                                           "heterogeneity_features",
                                           "permutations",
                                           "seed",
                                           "significance",
                                           "_notes"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ValidationFailure("unknown config key '" + key + "'");
  }
  PipelineConfig c;
  try {
    if (j.contains("inputs")) {
      const auto& in_j = j.at("inputs");
      auto path = [&](const char* key, fs::path& field) {
        if (in_j.contains(key) && !in_j.at(key).is_null()) field = resolve(base_dir, in_j.at(key).get<std::string>());
      };
      path("cbgs", c.inputs.cbgs);
      path("adjacency", c.inputs.adjacency);
      path("parcels", c.inputs.parcels);
      path("claims", c.inputs.claims);
      path("bridge_pairs", c.inputs.bridge_pairs);
      path("stops", c.inputs.stops);
      path("census", c.inputs.census);
      path("poi", c.inputs.poi);
      path("roads", c.inputs.roads);
    }
    if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
    if (!j.contains("baseline_window") || !j.contains("event_window")) {
      throw ValidationFailure("config needs baseline_window and event_window");
    }
    c.baseline = parse_window(j.at("baseline_window"), "baseline_window");
    c.event = parse_window(j.at("event_window"), "event_window");
    if (j.contains("hmi_window") && !j.at("hmi_window").is_null()) c.hmi_window = parse_window(j.at("hmi_window"), "hmi_window");
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    get("hmi_days", c.hmi_days);
    get("home_dwell_hours", c.home_dwell_hours);
    get("visit_dwell_hours", c.visit_dwell_hours);
    get("steady_tolerance", c.steady_tolerance);
    get("perturbation_floor", c.perturbation_floor);
    get("max_interpolated_gap", c.max_interpolated_gap);
    get("pde_cap", c.pde_cap);
    get("match_max_distance_miles", c.match_max_distance_miles);
    if (j.contains("weight_scheme")) c.weight_scheme = parse_scheme_or_throw(j.at("weight_scheme").get<std::string>());
    if (j.contains("robustness_schemes")) {
      c.robustness_schemes.clear();
      for (const auto& s : j.at("robustness_schemes")) c.robustness_schemes.push_back(parse_scheme_or_throw(s.get<std::string>()));
    }
    get("scale_response", c.scale_response);
    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      if (s.contains("start")) c.sweep_grid.start = s.at("start").get<double>();
      if (s.contains("stop")) c.sweep_grid.stop = s.at("stop").get<double>();
      if (s.contains("step")) c.sweep_grid.step = s.at("step").get<double>();
      if (s.contains("focal")) c.sweep_focal = s.at("focal").get<std::vector<std::string>>();
      if (s.contains("inverse_square")) c.sweep_inverse_square = s.at("inverse_square").get<bool>();
    }
    get("alpha", c.alpha);
    if (j.contains("decay")) {
      const auto& d = j.at("decay");
      if (d.contains("feature")) c.decay_feature = d.at("feature").get<std::string>();
      if (d.contains("reach_variable")) c.reach_variable = d.at("reach_variable").get<std::string>();
      if (d.contains("subscript")) {
        auto s = spatial_analysis::parse_damage_subscript(d.at("subscript").get<std::string>());
        if (!s) throw ValidationFailure("decay.subscript must be 'neighbor' or 'own'");
        c.decay_subscript = *s;
      }
    }
    get("heterogeneity_features", c.heterogeneity_features);
    get("permutations", c.permutations);
    get("seed", c.seed);
    if (j.contains("significance")) {
      auto s = econometrics::parse_star_convention(j.at("significance").get<std::string>());
      if (!s) throw ValidationFailure("significance must be 'table' or 'strict'");
      c.stars = *s;
    }
  } catch (const json::exception& e) {
    throw ValidationFailure(std::string("config has a value of the wrong type: ") + e.what());
  }
  validate(c);
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationFailure("cannot read config " + path.string());
  return read_config(in, path.parent_path());
}

void write_config(std::ostream& out, const PipelineConfig& c, bool annotate) {
  ordered_json j;
  ordered_json inputs;
  auto path = [&](const char* key, const fs::path& p) { inputs[key] = p.empty() ? json(nullptr) : json(p.string()); };
  path("cbgs", c.inputs.cbgs);
  path("adjacency", c.inputs.adjacency);
  path("parcels", c.inputs.parcels);
  path("claims", c.inputs.claims);
  path("bridge_pairs", c.inputs.bridge_pairs);
  path("stops", c.inputs.stops);
  path("census", c.inputs.census);
  path("poi", c.inputs.poi);
  path("roads", c.inputs.roads);
  j["inputs"] = inputs;
  j["output_dir"] = c.output_dir.string();
  j["baseline_window"] = window_json(c.baseline);
  j["event_window"] = window_json(c.event);
  j["hmi_window"] = c.hmi_window ? window_json(*c.hmi_window) : ordered_json(nullptr);
  j["hmi_days"] = c.hmi_days;
  j["home_dwell_hours"] = c.home_dwell_hours;
  j["visit_dwell_hours"] = c.visit_dwell_hours;
  j["steady_tolerance"] = c.steady_tolerance;
  j["perturbation_floor"] = c.perturbation_floor;
  j["max_interpolated_gap"] = c.max_interpolated_gap;
  j["pde_cap"] = c.pde_cap;
  j["match_max_distance_miles"] = c.match_max_distance_miles;
  j["weight_scheme"] = weights::to_string(c.weight_scheme);
  j["robustness_schemes"] = ordered_json::array();
  for (const auto& s : c.robustness_schemes) j["robustness_schemes"].push_back(weights::to_string(s));
  j["scale_response"] = c.scale_response;
  j["sweep"] = {{"start", c.sweep_grid.start},
                {"stop", c.sweep_grid.stop},
                {"step", c.sweep_grid.step},
                {"focal", c.sweep_focal},
                {"inverse_square", c.sweep_inverse_square}};
  j["alpha"] = c.alpha;
  j["decay"] = {{"feature", c.decay_feature},
                {"reach_variable", c.reach_variable},
                {"subscript", spatial_analysis::to_string(c.decay_subscript)}};
  j["heterogeneity_features"] = c.heterogeneity_features;
  j["permutations"] = c.permutations;
  j["seed"] = c.seed;
  j["significance"] = econometrics::to_string(c.stars);
  if (annotate) {
    ordered_json notes;
    for (const auto& [key, _] : j.items()) {
      auto it = config_notes().find(key);
      if (it != config_notes().end()) notes[key] = it->second;
    }
    j["_notes"] = notes;
  }
  out << j.dump(2) << '\n';
}

PipelineConfig scenario_config(DateWindow baseline, DateWindow event) {
  PipelineConfig c;
  c.inputs = {"cbgs.csv", "adjacency.csv", "parcels.csv", "claims.csv", "bridge_pairs.csv",
              "stops.csv", "census.csv", "poi.csv", "roads.csv"};
  c.output_dir = "artifacts";
  c.baseline = baseline;
  c.event = event;
  return c;
}

// ---------------------------------------------------------------------------------------------
// Stage machinery

namespace {

struct Context {
  const PipelineConfig& cfg;
  StageRecord& record;
  std::map<std::string, std::string> outputs;  // relative path -> bytes

  fs::path artifact(const std::string& rel) const { return cfg.output_dir / rel; }

  void emit(const std::string& rel, std::string bytes) { outputs[rel] = std::move(bytes); }

  template <typename Fn>
  void emit_with(const std::string& rel, Fn&& write) {
    std::ostringstream ss;
    write(ss);
    emit(rel, ss.str());
  }

  void note(std::string text) { record.notes.push_back(std::move(text)); }
};

struct InputSpec {
  std::string key;  // manifest key
  fs::path path;
  bool required;
  std::string label;
};

std::string artifact_key(const std::string& rel) { return "artifact:" + rel; }

std::vector<InputSpec> stage_inputs(Stage stage, const PipelineConfig& c) {
  auto file = [](const std::string& label, const fs::path& p, bool required) {
    return InputSpec{"input:" + label, p, required, label};
  };
  auto art = [&](const std::string& rel) { return InputSpec{artifact_key(rel), c.output_dir / rel, true, rel}; };
  const auto& in = c.inputs;
  switch (stage) {
    case Stage::ingest:
      return {file("cbgs", in.cbgs, true),          file("adjacency", in.adjacency, false),
              file("parcels", in.parcels, false),   file("claims", in.claims, false),
              file("bridge_pairs", in.bridge_pairs, false), file("stops", in.stops, false),
              file("census", in.census, false),     file("poi", in.poi, false),
              file("roads", in.roads, false)};
    case Stage::damage:
      return {file("cbgs", in.cbgs, true), file("parcels", in.parcels, true), file("claims", in.claims, true),
              file("bridge_pairs", in.bridge_pairs, false)};
    case Stage::mobility:
      return {file("cbgs", in.cbgs, true), file("stops", in.stops, true)};
    case Stage::covariates:
      return {file("cbgs", in.cbgs, true), file("census", in.census, true), file("poi", in.poi, true),
              file("roads", in.roads, true), file("stops", in.stops, true)};
    case Stage::regression:
      return {file("cbgs", in.cbgs, true), file("adjacency", in.adjacency, false), art("damage/cbg_damage.csv"),
              art("covariates/controls.csv"), art("mobility/recovery.csv")};
    case Stage::sweep:
      return {file("cbgs", in.cbgs, true), art("regression/frame.csv")};
    case Stage::decay:
      return {file("cbgs", in.cbgs, true), file("adjacency", in.adjacency, false), art("regression/frame.csv"),
              art("sweep/reach_summary.json")};
    case Stage::heterogeneity:
      return {art("regression/frame.csv"), art("decay/decay.csv")};
  }
  return {};
}

bool present(const fs::path& p) { return !p.empty() && fs::is_regular_file(p); }

csv::Table read_table(const fs::path& path) {
  try {
    return csv::read_file(path);
  } catch (const InvalidArgument& e) {
    throw ValidationFailure(path.string() + ": " + e.what());
  }
}

template <typename Record>
std::vector<Record> keep_valid(Context& ctx, const std::string& table, ingest::LoadResult<Record> result) {
  if (!result.rejected.empty()) {
    ctx.note(table + ": " + std::to_string(result.rejected.size()) + " rows rejected");
  }
  return std::move(result.records);
}

// Loader errors on missing columns are validation failures.
template <typename Fn>
auto load(const std::string& what, Fn&& fn) {
  try {
    return fn();
  } catch (const InvalidArgument& e) {
    throw ValidationFailure(what + ": " + e.what());
  }
}

ingest::CbgIndex load_index(Context& ctx) {
  const auto& in = ctx.cfg.inputs;
  auto cbgs = keep_valid(ctx, "cbgs", load("cbgs", [&] { return ingest::load_cbgs(read_table(in.cbgs)); }));
  std::vector<ingest::AdjacencyPair> adjacency;
  if (present(in.adjacency)) {
    adjacency = keep_valid(ctx, "adjacency", load("adjacency", [&] { return ingest::load_adjacency(read_table(in.adjacency)); }));
  }
  return load("cbgs", [&] { return ingest::CbgIndex(std::move(cbgs), std::move(adjacency)); });
}

std::string diagnostics_csv(const std::string& table, const Diagnostics& d) {
  std::ostringstream ss;
  ingest::write_diagnostics(ss, table, d);
  return ss.str();
}

weights::SpatialWeights frame_weights(const ingest::CbgIndex& index, const frame::RegressionFrame& fr,
                                      const geo::Points& points, const weights::Scheme& scheme) {
  std::vector<std::vector<std::size_t>> adjacency;
  if (scheme.kind == weights::SchemeKind::contiguity) {
    std::map<std::size_t, std::size_t> to_frame;
    for (std::size_t r = 0; r < fr.cbg_ids.size(); ++r) to_frame[*index.find(fr.cbg_ids[r])] = r;
    adjacency.resize(fr.cbg_ids.size());
    for (const auto& [global, local] : to_frame) {
      for (std::size_t nb : index.adjacency()[global]) {
        auto it = to_frame.find(nb);
        if (it != to_frame.end()) adjacency[local].push_back(it->second);
      }
    }
  }
  return weights::build_weights(points, scheme, scheme.kind == weights::SchemeKind::contiguity ? &adjacency : nullptr);
}

std::string fmt(double v) { return csv::format_number(v); }

// --- ingest ---------------------------------------------------------------------------------

void run_ingest(Context& ctx) {
  const auto& in = ctx.cfg.inputs;
  ingest::Dataset data;
  ordered_json tables;
  std::ostringstream rejected;
  csv::Writer rw(rejected);
  rw.row({"table", "row", "subject", "reason"});
  auto track = [&](const std::string& name, auto result) {
    tables[name] = {{"accepted", result.records.size()}, {"rejected", result.rejected.size()}};
    for (const auto& d : result.rejected) rw.row({name, std::to_string(d.row), d.subject, d.reason});
    return std::move(result.records);
  };
  data.cbgs = track("cbgs", load("cbgs", [&] { return ingest::load_cbgs(read_table(in.cbgs)); }));
  if (present(in.adjacency)) data.adjacency = track("adjacency", load("adjacency", [&] { return ingest::load_adjacency(read_table(in.adjacency)); }));
  const ingest::CbgIndex index = load("cbgs", [&] { return ingest::CbgIndex(data.cbgs, data.adjacency); });

  auto optional_table = [&](const std::string& name, const fs::path& p, auto loader) {
    if (!present(p)) {
      ctx.note("input '" + name + "' not present");
      return decltype(track(name, loader(csv::Table{}))){};
    }
    return track(name, load(name, [&] { return loader(read_table(p)); }));
  };
  // Unknown CBGs are kept here and reported as orphans by the validation pass.
  data.parcels = optional_table("parcels", in.parcels, [](const csv::Table& t) { return ingest::load_parcels(t); });
  data.claims = optional_table("claims", in.claims, [](const csv::Table& t) { return ingest::load_claims(t); });
  data.bridge_pairs = optional_table("bridge_pairs", in.bridge_pairs, [](const csv::Table& t) { return ingest::load_bridge_pairs(t); });
  data.stops = optional_table("stops", in.stops, [](const csv::Table& t) { return ingest::load_stops(t); });
  data.census = optional_table("census", in.census, [&](const csv::Table& t) { return ingest::load_census(t, &index); });
  data.poi = optional_table("poi", in.poi, [&](const csv::Table& t) { return ingest::load_counts(t, "poi_count", &index); });
  data.roads = optional_table("roads", in.roads, [&](const csv::Table& t) { return ingest::load_counts(t, "segment_count", &index); });

  const auto report = ingest::validate_dataset(data, ctx.cfg.match_max_distance_miles);
  ordered_json v;
  v["tables"] = tables;
  v["orphan_stops"] = report.orphan_stops;
  v["orphan_parcels"] = report.orphan_parcels;
  v["claims_without_parcel"] = report.claims_without_parcel;
  v["parcel_hint_mismatches"] = report.parcel_hint_mismatches;
  v["asymmetric_adjacency"] = report.asymmetric_adjacency.size();
  v["orphan_count"] = report.orphan_count();
  ctx.emit("ingest/validation.json", v.dump(2) + "\n");
  ctx.emit("ingest/rejected.csv", rejected.str());
  ctx.emit("ingest/cross_checks.csv", diagnostics_csv("cross_checks", report.details));
}

// --- damage ---------------------------------------------------------------------------------

void run_damage(Context& ctx) {
  const auto& in = ctx.cfg.inputs;
  const auto index = load_index(ctx);
  const auto parcels = keep_valid(ctx, "parcels", load("parcels", [&] { return ingest::load_parcels(read_table(in.parcels), &index); }));
  const auto claims = keep_valid(ctx, "claims", load("claims", [&] { return ingest::load_claims(read_table(in.claims)); }));
  std::optional<damage::BridgeModel> bridge;
  ordered_json bj;
  if (present(in.bridge_pairs)) {
    const auto pairs = keep_valid(ctx, "bridge_pairs", load("bridge_pairs", [&] { return ingest::load_bridge_pairs(read_table(in.bridge_pairs)); }));
    try {
      bridge = damage::fit_ia_nfip_bridge(pairs);
    } catch (const InvalidArgument& e) {
      throw StageFailure(std::string("IA-NFIP bridge: ") + e.what());
    }
    bj = {{"slope", bridge->slope}, {"intercept", bridge->intercept}, {"r_squared", bridge->r_squared},
          {"n", bridge->n}, {"warnings", bridge->warnings}};
  } else {
    bj = nullptr;
  }
  const auto matches = damage::match_claims_to_parcels(claims, parcels, ctx.cfg.match_max_distance_miles);
  std::vector<damage::PdeRecord> pde;
  try {
    pde = damage::compute_pde(claims, parcels, matches, bridge, ctx.cfg.pde_cap);
  } catch (const InvalidArgument& e) {
    throw StageFailure(e.what());
  }
  const auto rows = damage::aggregate_cbg_damage(pde, index);

  std::ostringstream unmatched;
  csv::Writer uw(unmatched);
  uw.row({"claim_id", "reason"});
  for (std::size_t c : matches.unmatched) uw.row({claims[c].claim_id, "no parcel within match distance"});
  if (!matches.unmatched.empty()) ctx.note(std::to_string(matches.unmatched.size()) + " claims without a parcel");
  const auto capped = std::count_if(pde.begin(), pde.end(), [](const auto& r) { return r.capped; });
  if (capped > 0) ctx.note(std::to_string(capped) + " PDE values capped");

  ctx.emit_with("damage/pde.csv", [&](std::ostream& o) { damage::write_pde_records(o, pde); });
  ctx.emit_with("damage/cbg_damage.csv", [&](std::ostream& o) { damage::write_cbg_damage(o, rows); });
  ctx.emit("damage/unmatched_claims.csv", unmatched.str());
  ctx.emit("damage/bridge.json", bj.dump(2) + "\n");
}

// --- mobility -------------------------------------------------------------------------------

void run_mobility(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto index = load_index(ctx);
  const auto stops = keep_valid(ctx, "stops", load("stops", [&] { return ingest::load_stops(read_table(cfg.inputs.stops), &index); }));
  const auto homes = mobility::detect_home_cbgs(stops, cfg.home_dwell_hours);
  const DateWindow study{cfg.baseline.first, cfg.event.last};
  const auto series = mobility::compute_daily_movement(stops, homes, study, cfg.visit_dwell_hours);
  const mobility::RecoveryParams params{cfg.steady_tolerance, cfg.perturbation_floor, cfg.max_interpolated_gap};
  std::vector<mobility::RecoveryResult> results;
  std::map<std::string, std::size_t> status_counts;
  for (const auto& s : series) {
    results.push_back(mobility::compute_recovery_rate(s, cfg.baseline, cfg.event, params));
    ++status_counts[mobility::to_string(results.back().status)];
  }
  for (const auto& [status, count] : status_counts) ctx.note(status + ": " + std::to_string(count));
  ctx.emit_with("mobility/recovery.csv", [&](std::ostream& o) { mobility::write_recovery(o, results); });
  ctx.emit_with("mobility/pc_series.csv", [&](std::ostream& o) { mobility::write_pc_series(o, results); });
  std::ostringstream notes;
  csv::Writer nw(notes);
  nw.row({"cbg_id", "status", "note"});
  for (const auto& r : results) {
    if (!r.note.empty()) nw.row({r.cbg_id, mobility::to_string(r.status), r.note});
  }
  ctx.emit("mobility/notes.csv", notes.str());
}

// --- covariates -----------------------------------------------------------------------------

void run_covariates(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto index = load_index(ctx);
  const auto census = keep_valid(ctx, "census", load("census", [&] { return ingest::load_census(read_table(cfg.inputs.census), &index); }));
  const auto poi = keep_valid(ctx, "poi", load("poi", [&] { return ingest::load_counts(read_table(cfg.inputs.poi), "poi_count", &index); }));
  const auto roads = keep_valid(ctx, "roads", load("roads", [&] { return ingest::load_counts(read_table(cfg.inputs.roads), "segment_count", &index); }));
  const auto stops = keep_valid(ctx, "stops", load("stops", [&] { return ingest::load_stops(read_table(cfg.inputs.stops), &index); }));
  const auto visits = covariates::count_visits(stops, cfg.hmi_window.value_or(cfg.baseline));
  const auto table = covariates::compute_controls(index, census, poi, roads, visits, cfg.hmi_days);
  for (const auto& w : table.warnings) ctx.note(w);

  // Scaled variants over the CBGs with controls.
  std::vector<covariates::ControlVariables> scaled = table.rows;
  if (!scaled.empty()) {
    const auto n = static_cast<Index>(scaled.size());
    auto scale = [&](auto member) {
      Vector v(n);
      for (Index i = 0; i < n; ++i) v(i) = scaled[static_cast<std::size_t>(i)].*member;
      const auto s = covariates::min_max_scale(v);
      for (Index i = 0; i < n; ++i) scaled[static_cast<std::size_t>(i)].*member = s.values(i);
    };
    scale(&covariates::ControlVariables::pop);
    scale(&covariates::ControlVariables::ms);
    scale(&covariates::ControlVariables::is);
    scale(&covariates::ControlVariables::hmi);
    scale(&covariates::ControlVariables::poi);
    scale(&covariates::ControlVariables::rd);
  }
  ctx.emit_with("covariates/controls.csv", [&](std::ostream& o) { covariates::write_controls(o, table.rows); });
  ctx.emit_with("covariates/controls_scaled.csv", [&](std::ostream& o) { covariates::write_controls(o, scaled); });
  ctx.emit("covariates/excluded.csv", diagnostics_csv("controls", table.excluded));
}

// --- regression -----------------------------------------------------------------------------

ordered_json coefficient_json(const econometrics::RegressionFit& fit, econometrics::StarConvention stars) {
  ordered_json arr = ordered_json::array();
  for (std::size_t j = 0; j < fit.names.size(); ++j) {
    const auto i = static_cast<Index>(j);
    arr.push_back({{"name", fit.names[j]},
                   {"estimate", fit.coefficients(i)},
                   {"se", number_or_null(fit.standard_errors(i))},
                   {"t", number_or_null(fit.t_statistics(i))},
                   {"p", number_or_null(fit.p_values(i))},
                   {"stars", econometrics::significance_stars(fit.p_values(i), stars)}});
  }
  return arr;
}

ordered_json metrics_json(const econometrics::RegressionFit& fit) {
  return {{"n", fit.n},
          {"k", fit.k},
          {"r_squared", fit.r_squared},
          {"adjusted_r_squared", fit.adjusted_r_squared},
          {"log_likelihood", number_or_null(fit.log_likelihood)},
          {"aic", number_or_null(fit.aic)}};
}

ordered_json effects_json(const econometrics::EffectsTable& effects, econometrics::StarConvention stars) {
  ordered_json arr = ordered_json::array();
  for (const auto& e : effects) {
    auto part = [&](double v, double se, double p) {
      return ordered_json{{"estimate", v}, {"se", number_or_null(se)}, {"p", number_or_null(p)},
                          {"stars", econometrics::significance_stars(p, stars)}};
    };
    arr.push_back({{"name", e.name},
                   {"direct", part(e.direct, e.se_direct, e.p_direct)},
                   {"indirect", part(e.indirect, e.se_indirect, e.p_indirect)},
                   {"total", part(e.total, e.se_total, e.p_total)},
                   {"lag_dropped", e.lag_dropped}});
  }
  return arr;
}

ordered_json moran_json(const std::string& variable, const econometrics::MoranResult& m,
                        econometrics::StarConvention stars) {
  return {{"variable", variable},
          {"statistic", m.statistic},
          {"expected", m.expected},
          {"p_value", number_or_null(m.p_value)},
          {"stars", econometrics::significance_stars(m.p_value, stars)},
          {"permutations", m.permutations},
          {"null_mean", m.null_mean},
          {"null_sd", m.null_sd}};
}

std::uint64_t moran_seed(std::uint64_t seed, std::uint64_t variable, std::uint64_t scheme) {
  return stream_seed(seed, 0x4D6F72616EULL + variable, scheme);
}

void run_regression(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto index = load_index(ctx);
  const auto damage_rows = load("damage artifact", [&] { return damage::read_cbg_damage(read_table(ctx.artifact("damage/cbg_damage.csv"))); });
  const auto controls = load("covariates artifact", [&] { return covariates::read_controls(read_table(ctx.artifact("covariates/controls.csv"))); });
  const auto recovery = load("mobility artifact", [&] { return mobility::read_recovery(read_table(ctx.artifact("mobility/recovery.csv"))); });
  const auto fr = frame::assemble_frame(index, damage_rows, controls, recovery, cfg.scale_response);
  for (const auto& w : fr.warnings) ctx.note(w);
  const Index m = static_cast<Index>(fr.names.size());
  if (fr.size() <= 2 * m + 1) {
    throw StageFailure("regression frame has " + std::to_string(fr.size()) + " rows; at least " +
                       std::to_string(2 * m + 2) + " are needed");
  }
  ctx.emit_with("regression/frame.csv", [&](std::ostream& o) { frame::write_frame(o, fr); });
  ctx.emit("regression/frame_excluded.csv", diagnostics_csv("frame", fr.excluded));

  // Descriptive statistics of the unscaled variables.
  {
    std::ostringstream ss;
    csv::Writer w(ss);
    w.row({"variable", "type", "min", "max", "mean", "std"});
    auto stats = [&](const std::string& name, const std::string& type, const Vector& v) {
      const double mean = v.mean();
      const double sd = std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
      w.row({name, type, fmt(v.minCoeff()), fmt(v.maxCoeff()), fmt(mean), fmt(sd)});
    };
    stats("rr", "dependent", fr.y);
    for (Index j = 0; j < m; ++j) {
      stats(fr.names[static_cast<std::size_t>(j)], j < static_cast<Index>(frame::kDamageColumns) ? "independent" : "control",
            fr.raw.col(j));
    }
    ctx.emit("regression/descriptive.csv", ss.str());
  }

  ordered_json report;
  report["n"] = fr.size();
  report["variables"] = fr.names;
  report["significance"] = econometrics::to_string(cfg.stars);
  report["weight_scheme"] = weights::to_string(cfg.weight_scheme);

  ordered_json correlations = ordered_json::array();
  for (Index j = 0; j < m; ++j) {
    const auto& name = fr.names[static_cast<std::size_t>(j)];
    try {
      const auto c = econometrics::pearson_correlation(fr.x.col(j), fr.y);
      correlations.push_back({{"name", name}, {"r", c.r}, {"p", c.p_value},
                              {"stars", econometrics::significance_stars(c.p_value, cfg.stars)}});
    } catch (const InvalidArgument& e) {
      correlations.push_back({{"name", name}, {"r", nullptr}, {"p", nullptr}, {"stars", ""}});
      ctx.note("correlation of " + name + ": " + e.what());
    }
  }
  report["correlations"] = correlations;

  {
    const auto v = econometrics::vif(fr.x);
    ordered_json arr = ordered_json::array();
    for (Index j = 0; j < m; ++j) {
      arr.push_back({{"name", fr.names[static_cast<std::size_t>(j)]},
                     {"vif", std::isfinite(v.vif(j)) ? json(v.vif(j)) : json("inf")},
                     {"flagged", static_cast<bool>(v.flagged[static_cast<std::size_t>(j)])}});
    }
    report["vif"] = arr;
  }

  const geo::Points points = frame::frame_points(index, fr);
  const auto w = frame_weights(index, fr, points, cfg.weight_scheme);
  if (!w.isolates().empty()) ctx.note(std::to_string(w.isolates().size()) + " isolates under the main weights");

  // Moran's I of the response and every regressor.
  ordered_json morans = ordered_json::array();
  auto moran_of = [&](const std::string& name, const Vector& v, std::uint64_t var, std::uint64_t scheme,
                      const weights::SpatialWeights& ww) -> std::optional<econometrics::MoranResult> {
    try {
      return econometrics::morans_i(v, ww, cfg.permutations, moran_seed(cfg.seed, var, scheme));
    } catch (const InvalidArgument& e) {
      ctx.note("Moran's I of " + name + ": " + e.what());
      return std::nullopt;
    }
  };
  if (auto mr = moran_of("rr", fr.y, 0, 0, w)) {
    report["moran"] = moran_json("rr", *mr, cfg.stars);
    morans.push_back(report["moran"]);
  } else {
    report["moran"] = nullptr;
  }
  for (Index j = 0; j < m; ++j) {
    const auto& name = fr.names[static_cast<std::size_t>(j)];
    if (auto mr = moran_of(name, fr.x.col(j), static_cast<std::uint64_t>(j + 1), 0, w)) {
      morans.push_back(moran_json(name, *mr, cfg.stars));
    }
  }
  report["moran_all"] = morans;

  const auto ols = econometrics::fit_ols(fr.y, fr.x, fr.names);
  report["ols"] = {{"coefficients", coefficient_json(ols, cfg.stars)}, {"metrics", metrics_json(ols)}};

  try {
    const auto slx = econometrics::fit_slx(fr.y, fr.x, w, fr.names);
    for (const auto& warn : slx.warnings) ctx.note(warn);
    report["slx"] = {{"coefficients", coefficient_json(slx.fit, cfg.stars)},
                     {"effects", effects_json(slx.effects, cfg.stars)},
                     {"metrics", metrics_json(slx.fit)},
                     {"warnings", slx.warnings}};
  } catch (const Error& e) {
    ctx.note(std::string("SLX not estimable: ") + e.what());
    report["slx"] = nullptr;
  }

  // Robustness across weight schemes.
  ordered_json robustness = ordered_json::array();
  std::uint64_t scheme_id = 1;
  for (const auto& scheme : cfg.robustness_schemes) {
    const std::string label = weights::to_string(scheme);
    ++scheme_id;
    if (scheme.kind == weights::SchemeKind::contiguity && !index.has_adjacency()) {
      ctx.note("robustness scheme " + label + " skipped: no adjacency input");
      continue;
    }
    try {
      const auto ws = frame_weights(index, fr, points, scheme);
      ordered_json entry;
      entry["scheme"] = label;
      if (auto mr = moran_of("rr", fr.y, 0, scheme_id, ws)) {
        entry["moran"] = moran_json("rr", *mr, cfg.stars);
      } else {
        entry["moran"] = nullptr;
      }
      const auto slx = econometrics::fit_slx(fr.y, fr.x, ws, fr.names);
      entry["coefficients"] = coefficient_json(slx.fit, cfg.stars);
      entry["effects"] = effects_json(slx.effects, cfg.stars);
      entry["metrics"] = metrics_json(slx.fit);
      robustness.push_back(entry);
    } catch (const Error& e) {
      ctx.note("robustness scheme " + label + " skipped: " + e.what());
    }
  }
  report["robustness"] = robustness;

  ctx.emit("regression/regression_report.json", report.dump(2) + "\n");
}

// --- sweep ----------------------------------------------------------------------------------

struct LoadedFrame {
  ingest::CbgIndex index;
  frame::RegressionFrame fr;
  geo::Points points;
};

LoadedFrame load_frame(Context& ctx) {
  LoadedFrame out{load_index(ctx), {}, {}};
  out.fr = load("regression artifact", [&] { return frame::read_frame(read_table(ctx.artifact("regression/frame.csv"))); });
  out.points = frame::frame_points(out.index, out.fr);
  return out;
}

ordered_json summarize_profile(Context& ctx, const LoadedFrame& lf, const spatial_analysis::ReachProfile& profile,
                               const weights::Scheme& unthresholded) {
  std::optional<econometrics::SlxFit> full;
  try {
    full = econometrics::fit_slx(lf.fr.y, lf.fr.x, weights::build_weights(lf.points, unthresholded), lf.fr.names);
  } catch (const Error& e) {
    ctx.note(std::string("unthresholded fit failed, extremum orientation defaults to min: ") + e.what());
  }
  ordered_json vars = ordered_json::array();
  for (const auto& v : profile.variables) {
    double indirect = -1.0;
    if (full) indirect = full->effects[static_cast<std::size_t>(lf.fr.column(v))].indirect;
    const auto orientation = spatial_analysis::orientation_from_sign(indirect);
    const auto s = spatial_analysis::locate_cutoff_and_extremum(profile, v, orientation, ctx.cfg.alpha);
    vars.push_back({{"variable", v},
                    {"orientation", spatial_analysis::to_string(orientation)},
                    {"unthresholded_indirect", full ? json(indirect) : json(nullptr)},
                    {"cutoff_distance", optional_json(s.cutoff_distance)},
                    {"extremum_distance", optional_json(s.extremum_distance)},
                    {"extremum_effect", optional_json(s.extremum_effect)}});
  }
  const auto skipped = std::count_if(profile.points.begin(), profile.points.end(), [](const auto& p) { return p.skipped; });
  return {{"thresholds", profile.points.size()},
          {"skipped", skipped},
          {"best_fit_distance", optional_json(spatial_analysis::best_fit_distance(profile))},
          {"variables", vars}};
}

std::optional<double> deviation_pct(const json& main, const json& other) {
  if (main.is_null() || other.is_null()) return std::nullopt;
  const double a = main.get<double>(), b = other.get<double>();
  if (a == 0.0) return std::nullopt;
  return (b - a) / a * 100.0;
}

void run_sweep(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto lf = load_frame(ctx);
  spatial_analysis::SweepOptions opts;
  opts.grid = cfg.sweep_grid;
  opts.focal = cfg.sweep_focal;
  opts.distance_power = 1;
  const auto profile = spatial_analysis::sweep_spatial_reach(lf.fr.y, lf.fr.x, lf.points, lf.fr.names, opts);
  ctx.emit_with("sweep/reach_profile.csv", [&](std::ostream& o) { spatial_analysis::write_reach_profile(o, profile); });

  ordered_json summary;
  summary["grid"] = {{"start", cfg.sweep_grid.start}, {"stop", cfg.sweep_grid.stop}, {"step", cfg.sweep_grid.step}};
  summary["alpha"] = cfg.alpha;
  summary["reach_variable"] = cfg.reach_variable;
  summary["inverse_distance"] = summarize_profile(ctx, lf, profile, weights::Scheme::inverse_distance());
  if (cfg.sweep_inverse_square) {
    opts.distance_power = 2;
    const auto sq = spatial_analysis::sweep_spatial_reach(lf.fr.y, lf.fr.x, lf.points, lf.fr.names, opts);
    ctx.emit_with("sweep/reach_profile_inverse_square.csv", [&](std::ostream& o) { spatial_analysis::write_reach_profile(o, sq); });
    auto s = summarize_profile(ctx, lf, sq, weights::Scheme::inverse_square());
    const auto& main_vars = summary["inverse_distance"]["variables"];
    for (std::size_t i = 0; i < s["variables"].size(); ++i) {
      auto& v = s["variables"][i];
      v["cutoff_deviation_pct"] = optional_json(deviation_pct(main_vars[i]["cutoff_distance"], v["cutoff_distance"]));
      v["extremum_deviation_pct"] = optional_json(deviation_pct(main_vars[i]["extremum_distance"], v["extremum_distance"]));
    }
    summary["inverse_square"] = s;
  } else {
    summary["inverse_square"] = nullptr;
  }
  ctx.emit("sweep/reach_summary.json", summary.dump(2) + "\n");
}

// --- decay ----------------------------------------------------------------------------------

void run_decay(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto lf = load_frame(ctx);
  json summary;
  try {
    summary = json::parse(read_bytes(ctx.artifact("sweep/reach_summary.json")));
  } catch (const json::exception& e) {
    throw ValidationFailure(std::string("sweep/reach_summary.json: ") + e.what());
  }
  std::optional<double> distance;
  for (const auto& v : summary.at("inverse_distance").at("variables")) {
    if (v.at("variable") == cfg.reach_variable && !v.at("extremum_distance").is_null()) {
      distance = v.at("extremum_distance").get<double>();
    }
  }
  if (!distance) throw StageFailure("no extremum distance for '" + cfg.reach_variable + "' in the reach profile");
  const auto w = weights::build_weights(lf.points, weights::Scheme::thresholded(*distance));
  const Vector damage = lf.fr.x.col(lf.fr.column(cfg.decay_feature));
  const auto field = spatial_analysis::compute_decay_coefficients(lf.fr.cbg_ids, lf.fr.y, damage, w, cfg.decay_feature,
                                                                  cfg.decay_subscript);
  ctx.emit_with("decay/decay.csv", [&](std::ostream& o) { spatial_analysis::write_decay(o, field); });
  std::map<std::string, std::size_t> reasons;
  for (const auto& e : field.entries) {
    if (!e.k) ++reasons[e.excluded_reason];
  }
  ordered_json s;
  s["distance_miles"] = *distance;
  s["rr0"] = field.rr0;
  s["damage_feature"] = field.damage_feature;
  s["subscript"] = spatial_analysis::to_string(field.subscript);
  s["included"] = field.included();
  s["excluded"] = reasons;
  ctx.emit("decay/decay_summary.json", s.dump(2) + "\n");

  if (lf.fr.size() <= synthetic::kMaxOracleSize) {
    const auto wm = frame_weights(lf.index, lf.fr, lf.points, cfg.weight_scheme);
    const auto ols = econometrics::fit_ols(lf.fr.y, lf.fr.x, lf.fr.names);
    const auto slx = econometrics::fit_slx(lf.fr.y, lf.fr.x, wm, lf.fr.names);
    const double moran = econometrics::morans_i_statistic(lf.fr.y, wm);
    const auto report = synthetic::oracle_checks(lf.fr, wm, ols, slx, moran, field);
    ctx.emit_with("decay/oracle_report.json", [&](std::ostream& o) { synthetic::write_oracle_report(o, report); });
  }
}

// --- heterogeneity --------------------------------------------------------------------------

void run_heterogeneity(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto fr = load("regression artifact", [&] { return frame::read_frame(read_table(ctx.artifact("regression/frame.csv"))); });
  const auto decay = read_table(ctx.artifact("decay/decay.csv"));
  load("decay artifact", [&] { decay.require_columns({"cbg_id", "k", "excluded_reason"}); return 0; });
  std::map<std::string, double> k_by_id;
  for (std::size_t r = 0; r < decay.size(); ++r) {
    if (decay.at(r, "k").empty()) continue;
    auto v = csv::parse_double(decay.at(r, "k"));
    if (!v) throw ValidationFailure("decay/decay.csv row " + std::to_string(r + 1) + " has an unparsable k");
    k_by_id[decay.at(r, "cbg_id")] = *v;
  }
  std::vector<Index> rows;
  std::vector<double> ks;
  for (Index i = 0; i < fr.size(); ++i) {
    auto it = k_by_id.find(fr.cbg_ids[static_cast<std::size_t>(i)]);
    if (it == k_by_id.end()) continue;
    rows.push_back(i);
    ks.push_back(it->second);
  }
  if (rows.empty()) throw StageFailure("no CBG has a decay coefficient");
  const Vector k = Eigen::Map<const Vector>(ks.data(), static_cast<Index>(ks.size()));
  std::vector<spatial_analysis::HeterogeneityResult> results;
  std::vector<std::pair<std::string, std::string>> failures;
  for (const auto& feature : cfg.heterogeneity_features) {
    const Index col = fr.column(feature);
    Vector values(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) values(static_cast<Index>(r)) = fr.x(rows[r], col);
    try {
      results.push_back(spatial_analysis::heterogeneity_test(k, values, feature));
    } catch (const InvalidArgument& e) {
      failures.emplace_back(feature, e.what());
      ctx.note(feature + ": " + e.what());
    }
  }
  ctx.emit_with("heterogeneity/heterogeneity.json",
                [&](std::ostream& o) { spatial_analysis::write_heterogeneity(o, results, failures); });
}

using StageFn = std::function<void(Context&)>;

StageFn stage_function(Stage s) {
  switch (s) {
    case Stage::ingest: return run_ingest;
    case Stage::damage: return run_damage;
    case Stage::mobility: return run_mobility;
    case Stage::covariates: return run_covariates;
    case Stage::regression: return run_regression;
    case Stage::sweep: return run_sweep;
    case Stage::decay: return run_decay;
    case Stage::heterogeneity: return run_heterogeneity;
  }
  return run_ingest;
}

// --- manifest -------------------------------------------------------------------------------

std::string config_hash(const PipelineConfig& cfg) {
  // Locations are excluded; input contents are hashed per stage.
  PipelineConfig c = cfg;
  c.output_dir.clear();
  c.inputs = {};
  std::ostringstream ss;
  write_config(ss, c, false);
  return sha256(ss.str());
}

ordered_json record_json(const StageRecord& r) {
  return {{"stage", to_string(r.stage)},
          {"status", r.status == "reused" ? "completed" : r.status},
          {"inputs", r.inputs},
          {"outputs", r.outputs},
          {"notes", r.notes},
          {"error", r.error}};
}

std::map<Stage, StageRecord> read_manifest(const fs::path& path, const std::string& cfg_hash) {
  std::map<Stage, StageRecord> out;
  if (!fs::is_regular_file(path)) return out;
  try {
    const auto j = json::parse(read_bytes(path));
    const bool same_config = j.value("config_sha256", "") == cfg_hash;
    for (const auto& s : j.at("stages")) {
      auto stage = parse_stage(s.at("stage").get<std::string>());
      if (!stage) continue;
      StageRecord r;
      r.stage = *stage;
      r.status = same_config ? s.at("status").get<std::string>() : "stale";
      r.inputs = s.at("inputs").get<std::map<std::string, std::string>>();
      r.outputs = s.at("outputs").get<std::map<std::string, std::string>>();
      r.notes = s.at("notes").get<std::vector<std::string>>();
      r.error = s.value("error", "");
      out[*stage] = std::move(r);
    }
  } catch (const std::exception&) {
    out.clear();  // an unreadable manifest only forfeits reuse
  }
  return out;
}

void write_manifest(const fs::path& path, const std::string& cfg_hash, const std::map<Stage, StageRecord>& records) {
  ordered_json j;
  j["config_sha256"] = cfg_hash;
  j["stages"] = ordered_json::array();
  for (Stage s : all_stages()) {
    auto it = records.find(s);
    if (it != records.end()) j["stages"].push_back(record_json(it->second));
  }
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << '\n';
}

bool reusable(const StageRecord& previous, const std::map<std::string, std::string>& inputs, const fs::path& out_dir) {
  if (previous.status != "completed" || previous.inputs != inputs) return false;
  for (const auto& [rel, hash] : previous.outputs) {
    const fs::path p = out_dir / rel;
    if (!fs::is_regular_file(p) || sha256_file(p) != hash) return false;
  }
  return true;
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg, const std::vector<Stage>& requested) {
  PipelineResult result;
  try {
    validate(cfg);
  } catch (const ValidationFailure& e) {
    result.exit_code = 1;
    result.message = e.what();
    return result;
  }
  std::vector<Stage> stages;
  for (Stage s : all_stages()) {
    if (std::find(requested.begin(), requested.end(), s) != requested.end()) stages.push_back(s);
  }

  fs::create_directories(cfg.output_dir);
  const fs::path manifest_path = cfg.output_dir / "manifest.json";
  const std::string cfg_hash = config_hash(cfg);
  auto records = read_manifest(manifest_path, cfg_hash);
  // A configuration change invalidates every recorded stage.
  for (auto it = records.begin(); it != records.end();) {
    it = it->second.status == "stale" ? records.erase(it) : std::next(it);
  }

  for (Stage stage : stages) {
    StageRecord record;
    record.stage = stage;
    try {
      for (const auto& in : stage_inputs(stage, cfg)) {
        if (present(in.path)) {
          record.inputs[in.key] = sha256_file(in.path);
        } else if (in.required) {
          throw ValidationFailure("stage " + to_string(stage) + ": missing input '" + in.label + "'" +
                                  (in.path.empty() ? std::string(" (not configured)") : " at " + in.path.string()));
        }
      }
      auto previous = records.find(stage);
      if (previous != records.end() && reusable(previous->second, record.inputs, cfg.output_dir)) {
        record = previous->second;
        record.status = "reused";
      } else {
        Context ctx{cfg, record, {}};
        stage_function(stage)(ctx);
        for (const auto& [rel, bytes] : ctx.outputs) {
          const fs::path p = cfg.output_dir / rel;
          fs::create_directories(p.parent_path());
          std::ofstream out(p, std::ios::binary);
          out << bytes;
          if (!out) throw StageFailure("cannot write " + p.string());
          record.outputs[rel] = sha256(bytes);
        }
        record.status = "completed";
      }
    } catch (const ValidationFailure& e) {
      record.status = "failed";
      record.error = e.what();
      result.exit_code = 1;
    } catch (const std::exception& e) {
      record.status = "failed";
      record.error = e.what();
      result.exit_code = 2;
    }
    records[stage] = record;
    result.stages.push_back(record);
    if (record.status == "failed") {
      result.message = to_string(stage) + ": " + record.error;
      break;
    }
  }
  write_manifest(manifest_path, cfg_hash, records);
  return result;
}

}  // namespace spillover::pipeline
