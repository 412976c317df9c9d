#pragma once

#include <spillover/common.hpp>
#include <spillover/econometrics.hpp>
#include <spillover/geo.hpp>
#include <spillover/weights.hpp>

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spillover::spatial_analysis {

// Thresholds start + i * step for i = 0, 1, ... while <= stop (with a 1e-9 step slack).
struct ThresholdGrid {
  double start = 0.1;
  double stop = 70.0;
  double step = 0.1;

  std::vector<double> values() const;
};

struct ReachPoint {
  double distance = 0.0;
  bool skipped = false;
  std::string skip_reason;              // "empty weights", "rank deficient", ...
  econometrics::EffectsTable effects;   // focal variables only, in profile order
  double log_likelihood = 0.0;
  double r_squared = 0.0;
  Index isolates = 0;
};

struct ReachProfile {
  std::vector<std::string> variables;  // focal variables
  std::vector<ReachPoint> points;      // strictly increasing distance
  int distance_power = 1;
};

struct SweepOptions {
  ThresholdGrid grid;
  std::vector<std::string> focal;  // empty: every regressor
  int distance_power = 1;          // 1: thresholded 1/d, 2: thresholded 1/d^2
};

// Fits SLX at every threshold with row-standardized thresholded weights. Lags are maintained
// incrementally per contiguous chunk of thresholds, so the profile does not depend on the
// number of threads.
ReachProfile sweep_spatial_reach(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Matrix>& x,
                                 const geo::Points& points, const std::vector<std::string>& names,
                                 const SweepOptions& options = {});

enum class Extremum { minimum, maximum };

std::string to_string(Extremum e);

struct ReachSummary {
  std::string variable;
  Extremum orientation = Extremum::minimum;
  std::optional<double> cutoff_distance;     // largest D with p_indirect <= alpha
  std::optional<double> extremum_distance;   // first D attaining the min (max) indirect effect
  std::optional<double> extremum_effect;
};

// Inhibitory (negative) effects look for the minimum, facilitating ones for the maximum.
inline Extremum orientation_from_sign(double unthresholded_indirect) {
  return unthresholded_indirect < 0.0 ? Extremum::minimum : Extremum::maximum;
}

// Throws InvalidArgument for an empty profile or an unknown variable.
ReachSummary locate_cutoff_and_extremum(const ReachProfile& profile, const std::string& variable,
                                        Extremum orientation, double alpha = 0.10);

// Threshold with the highest log-likelihood among fitted points.
std::optional<double> best_fit_distance(const ReachProfile& profile);

void write_reach_profile(std::ostream& out, const ReachProfile& profile);

enum class DamageSubscript {
  neighbor,  // sum_j w_ij d_j
  own,       // sum_j w_ij d_i, the formula read literally
};

std::string to_string(DamageSubscript s);
std::optional<DamageSubscript> parse_damage_subscript(std::string_view text);

// k = (rr0 - rr) / (rr * weighted_damage); nullopt when rr or the weighted damage is zero.
std::optional<double> decay_coefficient(double rr0, double rr, double weighted_damage);

struct DecayEntry {
  std::string cbg_id;
  double rr = 0.0;
  double weighted_damage = 0.0;
  std::optional<double> k;
  std::string excluded_reason;  // "zero recovery rate" or "zero weighted damage"
};

struct DecayField {
  double rr0 = 0.0;  // maximum recovery rate
  std::string damage_feature;
  DamageSubscript subscript = DamageSubscript::neighbor;
  std::vector<DecayEntry> entries;

  std::size_t included() const;
};

// damage should already be min-max scaled.
DecayField compute_decay_coefficients(const std::vector<std::string>& cbg_ids, const Eigen::Ref<const Vector>& rr,
                                      const Eigen::Ref<const Vector>& damage, const weights::SpatialWeights& w,
                                      std::string damage_feature = "nc",
                                      DamageSubscript subscript = DamageSubscript::neighbor);

void write_decay(std::ostream& out, const DecayField& field);

// Right-continuous step function over the sorted sample.
class EmpiricalCdf {
 public:
  explicit EmpiricalCdf(std::vector<double> sample);

  double operator()(double x) const;
  // Distinct sample values and the CDF at each.
  const std::vector<double>& support() const { return support_; }
  const std::vector<double>& probabilities() const { return probabilities_; }
  std::size_t size() const { return n_; }

 private:
  std::vector<double> support_;
  std::vector<double> probabilities_;
  std::size_t n_ = 0;
};

struct AnovaResult {
  double f = 0.0;
  double df_between = 0.0;
  double df_within = 0.0;
  double p_value = 1.0;
};

// One-way ANOVA. Throws InvalidArgument with fewer than two groups, an empty group, or no
// within-group degrees of freedom.
AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups);

struct GroupSummary {
  std::string label;  // "low" (feature <= mean) or "high"
  std::size_t size = 0;
  double mean_k = 0.0;
  EmpiricalCdf cdf{std::vector<double>{}};
};

struct HeterogeneityResult {
  std::string feature;
  double split_value = 0.0;  // feature mean
  GroupSummary low;
  GroupSummary high;
  AnovaResult anova;
};

// Splits the k field at the feature mean and compares the groups. Throws InvalidArgument when a
// group is empty.
HeterogeneityResult heterogeneity_test(const Eigen::Ref<const Vector>& k, const Eigen::Ref<const Vector>& feature,
                                       std::string feature_name);

void write_heterogeneity(std::ostream& out, const std::vector<HeterogeneityResult>& results,
                         const std::vector<std::pair<std::string, std::string>>& failures = {});

}  // namespace spillover::spatial_analysis
