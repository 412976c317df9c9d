#pragma once

#include <spillover/common.hpp>
#include <spillover/covariates.hpp>
#include <spillover/csv.hpp>
#include <spillover/damage.hpp>
#include <spillover/geo.hpp>
#include <spillover/ingest.hpp>
#include <spillover/mobility.hpp>

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace spillover::frame {

// Damage metrics first, then the controls.
inline const std::vector<std::string>& regressor_names() {
  static const std::vector<std::string> names{"nc", "mp", "sdp", "mdp", "pop", "rd", "poi", "ms", "is", "hmi"};
  return names;
}

inline constexpr std::size_t kDamageColumns = 4;

// One row per CBG with a recovery rate, damage metrics and controls, in CBG index order.
struct RegressionFrame {
  std::vector<std::string> cbg_ids;
  Vector y;    // recovery rate
  Matrix raw;  // regressors as computed
  Matrix x;    // regressors min-max scaled over the frame
  std::vector<std::string> names = regressor_names();
  std::vector<std::string> warnings;
  Diagnostics excluded;

  Index size() const { return y.size(); }
  Index column(std::string_view name) const;  // throws InvalidArgument when absent
};

// Joins the per-CBG tables. CBGs without a recovery rate, damage row or controls are excluded
// with a reason. With `scale_response` the recovery rate is min-max scaled too.
RegressionFrame assemble_frame(const ingest::CbgIndex& index, std::span<const damage::CbgDamage> damage,
                               std::span<const covariates::ControlVariables> controls,
                               std::span<const mobility::RecoveryRow> recovery, bool scale_response = false);

// Planar centroids of the frame rows.
geo::Points frame_points(const ingest::CbgIndex& index, const RegressionFrame& frame);

// cbg_id, rr, raw regressors, then scaled regressors suffixed "_scaled".
void write_frame(std::ostream& out, const RegressionFrame& frame);
RegressionFrame read_frame(const csv::Table& table);

}  // namespace spillover::frame
