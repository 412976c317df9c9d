#pragma once

#include <spillover/common.hpp>
#include <spillover/dates.hpp>
#include <spillover/econometrics.hpp>
#include <spillover/spatial_analysis.hpp>
#include <spillover/weights.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace spillover::pipeline {

namespace fs = std::filesystem;

// Bad configuration, a missing input or artifact, or an input table without required columns.
class ValidationFailure : public Error {
 public:
  using Error::Error;
};

enum class Stage { ingest, damage, mobility, covariates, regression, sweep, decay, heterogeneity };

inline constexpr std::size_t kStageCount = 8;
const std::vector<Stage>& all_stages();
std::string to_string(Stage stage);
std::optional<Stage> parse_stage(std::string_view text);

struct InputPaths {
  fs::path cbgs, adjacency, parcels, claims, bridge_pairs, stops, census, poi, roads;
};

struct PipelineConfig {
  InputPaths inputs;
  fs::path output_dir = "artifacts";

  DateWindow baseline{};
  DateWindow event{};
  std::optional<DateWindow> hmi_window;  // defaults to the baseline window
  int hmi_days = 28;

  double home_dwell_hours = 24.0;
  double visit_dwell_hours = 4.0;
  double steady_tolerance = 0.10;
  double perturbation_floor = 0.05;
  int max_interpolated_gap = 2;
  double pde_cap = 1.0;
  double match_max_distance_miles = 0.25;

  weights::Scheme weight_scheme = weights::Scheme::inverse_distance();
  std::vector<weights::Scheme> robustness_schemes{weights::Scheme::contiguity(), weights::Scheme::knn(5),
                                                  weights::Scheme::inverse_square()};
  bool scale_response = false;

  spatial_analysis::ThresholdGrid sweep_grid;
  std::vector<std::string> sweep_focal;  // empty: all regressors
  bool sweep_inverse_square = true;
  double alpha = 0.10;

  std::string decay_feature = "nc";
  std::string reach_variable = "nc";
  spatial_analysis::DamageSubscript decay_subscript = spatial_analysis::DamageSubscript::neighbor;
  std::vector<std::string> heterogeneity_features{"pop", "rd", "poi", "hmi", "ms", "is"};

  int permutations = 999;
  std::uint64_t seed = 0;
  econometrics::StarConvention stars = econometrics::StarConvention::table;
};

// Relative input paths resolve against base_dir. Throws ValidationFailure on invalid values.
PipelineConfig read_config(std::istream& in, const fs::path& base_dir = {});
PipelineConfig load_config(const fs::path& path);
void write_config(std::ostream& out, const PipelineConfig& config, bool annotate = false);
void validate(const PipelineConfig& config);

// Config used for a generated scenario directory with relative input names.
PipelineConfig scenario_config(DateWindow baseline, DateWindow event);

struct StageRecord {
  Stage stage = Stage::ingest;
  std::string status;  // "completed", "reused", "failed"
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // artifact path -> sha256
  std::vector<std::string> notes;
  std::string error;
};

struct PipelineResult {
  int exit_code = 0;  // 0 success, 1 validation failure, 2 stage failure
  std::vector<StageRecord> stages;
  std::string message;
};

// Runs the requested stages in pipeline order. A stage whose inputs, configuration and outputs
// are unchanged since its recorded completion is reused. The first failure stops the run and
// keeps earlier outputs.
PipelineResult run_pipeline(const PipelineConfig& config, const std::vector<Stage>& stages);

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const fs::path& path);
std::string sha256(std::string_view bytes);

}  // namespace spillover::pipeline
