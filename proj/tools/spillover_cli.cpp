#include <spillover/pipeline.hpp>
#include <spillover/report.hpp>
#include <spillover/synthetic.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <iostream>

namespace fs = std::filesystem;
using namespace spillover;
using pipeline::PipelineConfig;

namespace {

constexpr int kValidation = 1;
constexpr int kStage = 2;

using Override = std::function<void(PipelineConfig&)>;

// Options shared by every pipeline subcommand. Each flag overrides the matching config key.
struct ConfigOptions {
  std::string config_path;
  std::vector<Override> overrides;

  template <typename T, typename Apply>
  void flag(CLI::App* app, const std::string& name, const std::string& help, Apply apply) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *value, help);
    overrides.push_back([opt, value, apply](PipelineConfig& c) {
      if (opt->count() > 0) apply(c, *value);
    });
  }

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_path, "pipeline config JSON");
    flag<std::string>(app, "--output-dir", "artifact directory", [](auto& c, const auto& v) { c.output_dir = v; });
    auto input = [&](const std::string& key, fs::path pipeline::InputPaths::*member) {
      flag<std::string>(app, "--" + key, key + " CSV", [member](auto& c, const auto& v) { c.inputs.*member = v; });
    };
    input("cbgs", &pipeline::InputPaths::cbgs);
    input("adjacency", &pipeline::InputPaths::adjacency);
    input("parcels", &pipeline::InputPaths::parcels);
    input("claims", &pipeline::InputPaths::claims);
    input("bridge-pairs", &pipeline::InputPaths::bridge_pairs);
    input("stops", &pipeline::InputPaths::stops);
    input("census", &pipeline::InputPaths::census);
    input("poi", &pipeline::InputPaths::poi);
    input("roads", &pipeline::InputPaths::roads);
    auto window = [&](const std::string& key, auto setter) {
      flag<std::string>(app, "--" + key, key + " as FIRST:LAST dates", [key, setter](auto& c, const auto& v) {
        const auto colon = v.find(':');
        auto first = parse_date(v.substr(0, colon));
        auto last = colon == std::string::npos ? std::nullopt : parse_date(v.substr(colon + 1));
        if (!first || !last) throw pipeline::ValidationFailure("--" + key + " expects YYYY-MM-DD:YYYY-MM-DD");
        setter(c, DateWindow{*first, *last});
      });
    };
    window("baseline-window", [](PipelineConfig& c, DateWindow w) { c.baseline = w; });
    window("event-window", [](PipelineConfig& c, DateWindow w) { c.event = w; });
    window("hmi-window", [](PipelineConfig& c, DateWindow w) { c.hmi_window = w; });
    flag<int>(app, "--hmi-days", "HMI day divisor", [](auto& c, int v) { c.hmi_days = v; });
    flag<double>(app, "--home-dwell-hours", "home detection dwell", [](auto& c, double v) { c.home_dwell_hours = v; });
    flag<double>(app, "--visit-dwell-hours", "visit dwell", [](auto& c, double v) { c.visit_dwell_hours = v; });
    flag<double>(app, "--steady-tolerance", "steady-state tolerance", [](auto& c, double v) { c.steady_tolerance = v; });
    flag<double>(app, "--perturbation-floor", "no-perturbation floor", [](auto& c, double v) { c.perturbation_floor = v; });
    flag<int>(app, "--max-interpolated-gap", "longest filled gap (days)", [](auto& c, int v) { c.max_interpolated_gap = v; });
    flag<double>(app, "--pde-cap", "PDE cap", [](auto& c, double v) { c.pde_cap = v; });
    flag<double>(app, "--match-max-distance-miles", "claim match radius", [](auto& c, double v) { c.match_max_distance_miles = v; });
    flag<std::string>(app, "--weight-scheme", "main weight scheme", [](auto& c, const auto& v) {
      auto s = weights::parse_scheme(v);
      if (!s) throw pipeline::ValidationFailure("unknown weight scheme '" + v + "'");
      c.weight_scheme = *s;
    });
    flag<bool>(app, "--scale-response", "min-max scale the recovery rate", [](auto& c, bool v) { c.scale_response = v; });
    flag<double>(app, "--sweep-start", "first threshold (miles)", [](auto& c, double v) { c.sweep_grid.start = v; });
    flag<double>(app, "--sweep-stop", "last threshold (miles)", [](auto& c, double v) { c.sweep_grid.stop = v; });
    flag<double>(app, "--sweep-step", "threshold step (miles)", [](auto& c, double v) { c.sweep_grid.step = v; });
    flag<std::vector<std::string>>(app, "--sweep-focal", "swept variables", [](auto& c, const auto& v) { c.sweep_focal = v; });
    flag<double>(app, "--alpha", "cut-off significance level", [](auto& c, double v) { c.alpha = v; });
    flag<std::string>(app, "--decay-feature", "damage feature for decay", [](auto& c, const auto& v) { c.decay_feature = v; });
    flag<std::string>(app, "--reach-variable", "variable giving the decay distance", [](auto& c, const auto& v) { c.reach_variable = v; });
    flag<int>(app, "--permutations", "Moran permutations", [](auto& c, int v) { c.permutations = v; });
    flag<std::uint64_t>(app, "--seed", "permutation seed", [](auto& c, std::uint64_t v) { c.seed = v; });
    flag<std::string>(app, "--significance", "star convention: table or strict", [](auto& c, const auto& v) {
      auto s = econometrics::parse_star_convention(v);
      if (!s) throw pipeline::ValidationFailure("significance must be 'table' or 'strict'");
      c.stars = *s;
    });
  }

  PipelineConfig resolve() const {
    PipelineConfig c = config_path.empty() ? PipelineConfig{} : pipeline::load_config(config_path);
    for (const auto& o : overrides) o(c);
    pipeline::validate(c);
    return c;
  }
};

int report_result(const pipeline::PipelineResult& r) {
  for (const auto& s : r.stages) {
    std::cout << pipeline::to_string(s.stage) << ": " << s.status << '\n';
    for (const auto& n : s.notes) std::cout << "  " << n << '\n';
  }
  if (r.exit_code != 0) std::cerr << "error: " << r.message << '\n';
  return r.exit_code;
}

int run_stages(const ConfigOptions& opts, const std::vector<pipeline::Stage>& stages, bool with_report) {
  PipelineConfig cfg;
  try {
    cfg = opts.resolve();
  } catch (const pipeline::ValidationFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  }
  const int code = report_result(pipeline::run_pipeline(cfg, stages));
  if (code != 0 || !with_report) return code;
  try {
    for (const auto& p : report::emit_report(cfg.output_dir)) std::cout << "wrote " << p.string() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: report: " << e.what() << '\n';
    return kStage;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial spillover analysis of flood damage and mobility recovery"};
  app.require_subcommand(1);

  struct StageCommand {
    const char* name;
    const char* help;
    pipeline::Stage stage;
  };
  const std::vector<StageCommand> stage_commands{
      {"ingest", "validate and cross-check input tables", pipeline::Stage::ingest},
      {"damage", "match claims, compute PDE and CBG damage metrics", pipeline::Stage::damage},
      {"recovery", "derive movement rates and recovery rates", pipeline::Stage::mobility},
      {"covariates", "compute control variables", pipeline::Stage::covariates},
      {"analyze", "correlations, VIF, Moran's I, OLS and SLX", pipeline::Stage::regression},
      {"sweep", "spatial reach sweep over distance thresholds", pipeline::Stage::sweep},
      {"decay", "decay coefficients at the reach distance", pipeline::Stage::decay},
      {"heterogeneity", "mean-split ANOVA of decay coefficients", pipeline::Stage::heterogeneity},
  };
  std::vector<std::unique_ptr<ConfigOptions>> options;
  int exit_code = 0;
  for (const auto& sc : stage_commands) {
    auto* sub = app.add_subcommand(sc.name, sc.help);
    options.push_back(std::make_unique<ConfigOptions>());
    options.back()->attach(sub);
    const ConfigOptions* o = options.back().get();
    const auto stage = sc.stage;
    sub->callback([o, stage, &exit_code] { exit_code = run_stages(*o, {stage}, false); });
  }

  auto* all = app.add_subcommand("run-all", "run every stage, then the report");
  options.push_back(std::make_unique<ConfigOptions>());
  options.back()->attach(all);
  {
    const ConfigOptions* o = options.back().get();
    all->callback([o, &exit_code] { exit_code = run_stages(*o, pipeline::all_stages(), true); });
  }

  auto* rep = app.add_subcommand("report", "render tables from existing artifacts");
  options.push_back(std::make_unique<ConfigOptions>());
  std::string artifacts;
  rep->add_option("-a,--artifacts", artifacts, "artifact directory (default: config output_dir)");
  rep->add_option("-c,--config", options.back()->config_path, "pipeline config JSON");
  {
    const ConfigOptions* o = options.back().get();
    rep->callback([o, &artifacts, &exit_code] {
      try {
        const fs::path dir = !artifacts.empty() ? fs::path(artifacts)
                             : !o->config_path.empty() ? pipeline::load_config(o->config_path).output_dir
                                                       : fs::path("artifacts");
        for (const auto& p : report::emit_report(dir)) std::cout << "wrote " << p.string() << '\n';
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        exit_code = kValidation;
      }
    });
  }

  auto* cfg_cmd = app.add_subcommand("config", "print the default configuration with annotations");
  cfg_cmd->callback([] { pipeline::write_config(std::cout, PipelineConfig{}, true); });

  auto* synth = app.add_subcommand("synth", "generate a synthetic scenario with planted ground truth");
  std::string spec_path, out_dir = "scenario", layout;
  std::uint64_t seed = 0;
  long n = 0;
  double radius = 0.0, sigma = -1.0;
  int devices = 0;
  synth->add_option("-o,--out", out_dir, "scenario directory");
  synth->add_option("--spec", spec_path, "scenario spec JSON");
  auto* seed_opt = synth->add_option("--seed", seed, "generator seed");
  auto* n_opt = synth->add_option("--n", n, "number of CBGs");
  synth->add_option("--layout", layout, "uniform or lattice")->check(CLI::IsMember({"uniform", "lattice"}));
  auto* radius_opt = synth->add_option("--radius-miles", radius, "planted spillover radius");
  auto* sigma_opt = synth->add_option("--sigma", sigma, "noise standard deviation");
  auto* devices_opt = synth->add_option("--devices-per-cbg", devices, "resident devices per CBG");
  synth->callback([&] {
    try {
      synthetic::ScenarioSpec spec;
      if (!spec_path.empty()) {
        std::ifstream in(spec_path);
        if (!in) throw InvalidArgument("cannot read " + spec_path);
        spec = synthetic::read_spec(in);
      }
      if (seed_opt->count()) spec.seed = seed;
      if (n_opt->count()) spec.n = n;
      if (!layout.empty()) spec.layout = layout == "lattice" ? synthetic::Layout::lattice : synthetic::Layout::uniform;
      if (radius_opt->count()) spec.radius_miles = radius;
      if (sigma_opt->count()) spec.sigma = sigma;
      if (devices_opt->count()) spec.devices_per_cbg = devices;
      const auto scenario = synthetic::generate_scenario(spec);
      synthetic::write_scenario(scenario, out_dir);
      std::ofstream cfg(fs::path(out_dir) / "config.json");
      pipeline::write_config(cfg, pipeline::scenario_config(spec.baseline_window(), spec.event_window()), true);
      std::cout << "wrote scenario with " << spec.n << " CBGs to " << out_dir << '\n';
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      exit_code = kValidation;
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kValidation;
  } catch (const pipeline::ValidationFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  }
  return exit_code;
}
