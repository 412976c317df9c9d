#pragma once

#include <spillover/common.hpp>
#include <spillover/dates.hpp>
#include <spillover/econometrics.hpp>
#include <spillover/frame.hpp>
#include <spillover/geo.hpp>
#include <spillover/ingest.hpp>
#include <spillover/spatial_analysis.hpp>
#include <spillover/weights.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace spillover::synthetic {

enum class Layout { uniform, lattice };

struct ScenarioSpec {
  std::uint64_t seed = 1;
  Index n = 60;
  Layout layout = Layout::uniform;
  double extent_miles = 70.0;  // side of the square study area
  double center_lon = -95.4;
  double center_lat = 29.8;

  // Planted model on the min-max scaled regressors:
  // y = beta0 + X beta + (W_R X) theta + sigma * e, W_R thresholded 1/d at the radius.
  double beta0 = 0.4;
  std::map<std::string, double> beta{{"nc", -0.1}, {"poi", 0.05}, {"hmi", 0.05}};
  std::map<std::string, double> theta{{"nc", -0.2}};
  double radius_miles = 10.0;
  double sigma = 0.0;

  // Claim counts follow a Gaussian-kernel smoothed field with this length scale.
  double field_scale_miles = 45.0;
  double claims_mean = 20.0;
  double claims_sd = 8.0;
  int claims_min = 2;
  double ia_share = 0.3;

  // Mobility: each CBG holds devices_per_cbg residents; a share makes an external visit each
  // baseline day. The event starts with a dip of dip_depth (fraction of baseline visitors).
  int devices_per_cbg = 200;
  double baseline_visit_share = 0.5;
  double dip_depth = 0.5;
  Date baseline_start = Date{std::chrono::year{2017} / 8 / 13};
  int baseline_days = 7;
  int event_days = 7;

  DateWindow baseline_window() const;
  DateWindow event_window() const;
  DateWindow study_window() const;
};

// Throws InvalidArgument naming the first violated constraint.
void validate(const ScenarioSpec& spec);

ScenarioSpec read_spec(std::istream& in);
void write_spec(std::ostream& out, const ScenarioSpec& spec);

struct GroundTruth {
  std::vector<std::string> cbg_ids;
  geo::Points points;  // planar centroids under the pipeline projection
  std::vector<std::string> names;
  Matrix x;             // realized scaled regressors
  Matrix wx;            // W_R x
  Vector beta;          // per regressor
  Vector theta;         // per regressor
  Vector y;             // planted recovery rate
  Vector realized_rr;   // what the mobility pipeline yields; NaN when not recovered
  Vector k;             // decay coefficients at W_R from y and scaled nc; NaN when excluded
};

struct Scenario {
  ScenarioSpec spec;
  ingest::Dataset data;
  GroundTruth truth;
};

// Deterministic in (spec): every random draw comes from a stream keyed by (seed, purpose, cbg).
// Throws InvalidArgument for an infeasible spec, including planted rates that cannot be realized.
Scenario generate_scenario(const ScenarioSpec& spec);

// Writes the ingest CSVs, scenario.json and ground_truth.csv into dir.
void write_scenario(const Scenario& scenario, const std::filesystem::path& dir);
void write_ground_truth(std::ostream& out, const GroundTruth& truth);

// Brute-force references.
double moran_double_sum(const Vector& x, const Matrix& w);
Vector ols_normal_equations(const Vector& y, const Matrix& design);
Matrix dense_lag(const Matrix& w, const Matrix& x);

struct OracleReport {
  Index n = 0;
  double moran_deviation = 0.0;
  double ols_deviation = 0.0;
  double slx_deviation = 0.0;
  double lag_deviation = 0.0;
  double decay_identity_residual = 0.0;
};

inline constexpr Index kMaxOracleSize = 200;

// Recomputes the estimates from the frame with the dense oracles and reports the largest
// absolute deviations. Throws InvalidArgument beyond kMaxOracleSize rows.
OracleReport oracle_checks(const frame::RegressionFrame& frame, const weights::SpatialWeights& w,
                           const econometrics::RegressionFit& ols, const econometrics::SlxFit& slx,
                           double moran_statistic, const spatial_analysis::DecayField& decay);

void write_oracle_report(std::ostream& out, const OracleReport& report);

}  // namespace spillover::synthetic
