#include <doctest.h>

#include <spillover/pipeline.hpp>
#include <spillover/synthetic.hpp>

#include <fstream>
#include <sstream>

using namespace spillover;
namespace fs = std::filesystem;

namespace {

struct Workspace {
  fs::path dir;
  pipeline::PipelineConfig config;

  explicit Workspace(const std::string& name) : dir(fs::temp_directory_path() / ("spillover_test_" + name)) {
    fs::remove_all(dir);
    synthetic::ScenarioSpec spec;
    spec.n = 30;
    spec.devices_per_cbg = 40;
    synthetic::write_scenario(synthetic::generate_scenario(spec), dir);
    std::ostringstream cfg;
    pipeline::write_config(cfg, pipeline::scenario_config(spec.baseline_window(), spec.event_window()));
    std::istringstream in(cfg.str());
    config = pipeline::read_config(in, dir);
    config.output_dir = dir / "artifacts";
    config.permutations = 99;
    config.sweep_grid = {2.0, 20.0, 2.0};
  }
  ~Workspace() { fs::remove_all(dir); }
};

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("full run, reuse, and invalidation") {
    Workspace ws("rerun");
    const auto first = pipeline::run_pipeline(ws.config, pipeline::all_stages());
    REQUIRE_MESSAGE(first.exit_code == 0, first.message);
    REQUIRE(first.stages.size() == pipeline::kStageCount);
    for (const auto& s : first.stages) CHECK(s.status == "completed");
    CHECK(fs::is_regular_file(ws.config.output_dir / "manifest.json"));

    const auto second = pipeline::run_pipeline(ws.config, pipeline::all_stages());
    REQUIRE(second.exit_code == 0);
    for (std::size_t i = 0; i < second.stages.size(); ++i) {
      CHECK(second.stages[i].status == "reused");
      CHECK(second.stages[i].outputs == first.stages[i].outputs);
    }

    // Touching the mobility input reruns mobility and what depends on it.
    {
      std::ifstream in(ws.config.inputs.stops);
      std::string line, last;
      while (std::getline(in, line)) last = line;
      in.close();
      std::ofstream(ws.config.inputs.stops, std::ios::app) << last << '\n';
    }
    const auto third = pipeline::run_pipeline(ws.config, pipeline::all_stages());
    REQUIRE(third.exit_code == 0);
    CHECK(third.stages[0].status == "completed");  // ingest hashes every input
    CHECK(third.stages[1].status == "reused");     // damage
    CHECK(third.stages[2].status == "completed");  // mobility
  }

  TEST_CASE("identical inputs give identical artifacts in another directory") {
    Workspace a("det_a"), b("det_b");
    REQUIRE(pipeline::run_pipeline(a.config, pipeline::all_stages()).exit_code == 0);
    REQUIRE(pipeline::run_pipeline(b.config, pipeline::all_stages()).exit_code == 0);
    for (const auto& e : fs::recursive_directory_iterator(a.config.output_dir)) {
      if (!e.is_regular_file()) continue;
      const auto rel = fs::relative(e.path(), a.config.output_dir);
      CHECK_MESSAGE(pipeline::sha256_file(e.path()) == pipeline::sha256_file(b.config.output_dir / rel), rel.string());
    }
  }

  TEST_CASE("missing input is a validation failure") {
    Workspace ws("missing");
    fs::remove(ws.config.inputs.stops);
    const auto r = pipeline::run_pipeline(ws.config, pipeline::all_stages());
    CHECK(r.exit_code == 1);
    CHECK(r.message.find("stops") != std::string::npos);
  }

  TEST_CASE("config validation") {
    std::istringstream unknown(R"({"bogus": 1})");
    CHECK_THROWS_AS(pipeline::read_config(unknown), pipeline::ValidationFailure);
    const synthetic::ScenarioSpec spec;
    pipeline::PipelineConfig c = pipeline::scenario_config(spec.baseline_window(), spec.event_window());
    CHECK_NOTHROW(pipeline::validate(c));
    c.alpha = 2.0;
    CHECK_THROWS_AS(pipeline::validate(c), pipeline::ValidationFailure);
    CHECK(pipeline::parse_stage("sweep") == pipeline::Stage::sweep);
    CHECK(pipeline::sha256("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }
}
