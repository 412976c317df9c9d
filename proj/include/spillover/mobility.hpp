#pragma once

#include <spillover/common.hpp>
#include <spillover/dates.hpp>
#include <spillover/ingest.hpp>

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spillover::mobility {

inline constexpr double kHomeDwellHours = 24.0;
inline constexpr double kVisitDwellHours = 4.0;
inline constexpr double kSteadyTolerance = 0.10;
inline constexpr double kPerturbationFloor = 0.05;
inline constexpr int kMaxInterpolatedGap = 2;

// device_id -> home cbg_id
using HomeAssignment = std::map<std::string, std::string>;

// Home = CBG holding a stop longer than the threshold. Several qualifying CBGs resolve to the
// largest cumulative qualifying dwell, then the smallest cbg_id. Devices without one are dropped.
HomeAssignment detect_home_cbgs(std::span<const ingest::StopRecord> stops, double home_dwell_hours = kHomeDwellHours);

// Daily movement rate of one home CBG over a contiguous study window.
struct MovementSeries {
  std::string cbg_id;
  Date first_date;
  std::vector<double> rate;       // NaN on dates without observed residents
  std::vector<int> residents;     // residents observed per date
  std::vector<int> visitors;      // residents with a qualifying external visit

  std::size_t size() const { return rate.size(); }
  Date date(std::size_t i) const { return first_date + std::chrono::days(static_cast<int>(i)); }
  std::optional<std::size_t> offset(Date d) const;
};

// A resident is observed on a date when one of its stops starts that day; it visits when one
// of those stops lies outside its home CBG with dwell >= the visit threshold. One series per
// home CBG, sorted by cbg_id.
std::vector<MovementSeries> compute_daily_movement(std::span<const ingest::StopRecord> stops,
                                                   const HomeAssignment& homes, DateWindow study,
                                                   double visit_dwell_hours = kVisitDwellHours);

// Baseline movement rate per weekday (index 0 = Sunday).
using WeeklyBaseline = std::array<double, 7>;

// Mean rate over each weekday's non-gap occurrences inside the window. Throws InvalidArgument
// when a weekday has no sample.
WeeklyBaseline compute_baseline(const MovementSeries& series, DateWindow baseline);

// Linear fill of interior NaN runs no longer than max_gap. Returns false when a longer run or an
// edge run remains.
bool interpolate_gaps(std::vector<double>& values, int max_gap = kMaxInterpolatedGap);

enum class RecoveryStatus { recovered, no_perturbation, censored };

std::string to_string(RecoveryStatus status);
std::optional<RecoveryStatus> parse_recovery_status(std::string_view text);

struct RecoveryParams {
  double steady_tolerance = kSteadyTolerance;
  double perturbation_floor = kPerturbationFloor;
  int max_gap = kMaxInterpolatedGap;
};

// Steady-state detection on a percent-change path, all offsets relative to `pc`.
struct RecoveryPoint {
  RecoveryStatus status = RecoveryStatus::censored;
  std::optional<std::size_t> trough;  // t_s
  std::optional<std::size_t> steady;  // t_n
  std::optional<double> rate;         // percent change per day
  std::optional<double> extent;       // gap between the trough level and 90% of baseline
};

// t_s is the first minimum; t_n the first later day whose change from the previous day is within
// the tolerance; rate = (pc[t_n] - pc[t_s]) / (t_n - t_s).
RecoveryPoint detect_recovery(std::span<const double> pc, const RecoveryParams& params = {});

struct RecoveryResult {
  std::string cbg_id;
  WeeklyBaseline baseline{};
  bool has_baseline = false;
  std::vector<double> rate;    // gap-filled movement rate
  std::vector<double> pc;      // percent change over the study window
  Date first_date;
  std::optional<Date> t_s;
  std::optional<Date> t_n;
  std::optional<double> rr;
  std::optional<double> recovery_extent;
  RecoveryStatus status = RecoveryStatus::censored;
  std::string note;
};

RecoveryResult compute_recovery_rate(const MovementSeries& series, DateWindow baseline, DateWindow event,
                                     const RecoveryParams& params = {});

struct RecoveryRow {
  std::string cbg_id;
  std::optional<Date> t_s;
  std::optional<Date> t_n;
  std::optional<double> rr;
  std::optional<double> recovery_extent;
  RecoveryStatus status = RecoveryStatus::censored;
};

void write_recovery(std::ostream& out, std::span<const RecoveryResult> results);
void write_pc_series(std::ostream& out, std::span<const RecoveryResult> results);
std::vector<RecoveryRow> read_recovery(const csv::Table& table);

}  // namespace spillover::mobility
