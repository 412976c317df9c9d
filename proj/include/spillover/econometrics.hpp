#pragma once

#include <spillover/common.hpp>
#include <spillover/weights.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace spillover::econometrics {

inline constexpr int kDefaultPermutations = 999;
inline constexpr double kVifThreshold = 10.0;

// Two-sided p-value of a t statistic.
double t_test_p_value(double t, double degrees_of_freedom);

struct RegressionFit {
  std::vector<std::string> names;  // "const" first when an intercept is fitted
  Vector coefficients;
  Vector standard_errors;
  Vector t_statistics;
  Vector p_values;
  Matrix covariance;  // sigma^2 (X'X)^-1 with sigma^2 = RSS / (n - k)
  Vector residuals;
  Vector fitted;
  double rss = 0.0;
  double r_squared = 0.0;
  double adjusted_r_squared = 0.0;
  double log_likelihood = 0.0;  // Gaussian, ML variance RSS / n
  double aic = 0.0;             // 2k - 2 logL
  Index n = 0;
  Index k = 0;  // estimated coefficients including the intercept
};

// Least squares through a column-pivoting QR. Prepends a constant column when `intercept`.
// Throws InvalidArgument when n <= k and RankDeficient when the design lacks full column rank.
RegressionFit fit_ols(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Matrix>& x,
                      const std::vector<std::string>& names = {}, bool intercept = true);

struct Correlation {
  double r = 0.0;
  double p_value = 1.0;
  Index n = 0;
};

// Sample correlation with a two-sided p-value from t = r sqrt((n-2)/(1-r^2)).
Correlation pearson_correlation(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y);

struct VifResult {
  Vector vif;                // +inf under exact collinearity
  std::vector<bool> flagged; // vif >= 10
};

// VIF_j = 1 / (1 - R_j^2), R_j^2 from regressing column j on the others plus a constant.
VifResult vif(const Eigen::Ref<const Matrix>& x);

enum class Alternative { two_sided, greater, less };

struct MoranResult {
  double statistic = 0.0;
  double expected = 0.0;  // -1 / (n - 1)
  double p_value = 1.0;
  int permutations = 0;
  double null_mean = 0.0;
  double null_sd = 0.0;
  Alternative alternative = Alternative::two_sided;
};

// n / S0 * z'Wz / z'z with z = x - mean(x). Throws InvalidArgument for a constant x.
template <typename Derived>
double morans_i_statistic(const Eigen::MatrixBase<Derived>& x, const weights::SpatialWeights& w) {
  if (x.size() != w.size()) throw InvalidArgument("Moran's I: vector does not match the weight matrix");
  const Vector z = x.derived().array() - x.mean();
  const double denom = z.squaredNorm();
  if (!(denom > 0.0)) throw InvalidArgument("Moran's I is undefined for a constant variable");
  const double s0 = w.total_weight();
  if (!(s0 > 0.0)) throw InvalidArgument("Moran's I needs a nonempty weight matrix");
  const double n = static_cast<double>(x.size());
  return n / s0 * z.dot(w.matrix() * z) / denom;
}

// Statistic plus a permutation test. Permutation p draws from its own stream derived from
// (seed, p), so the result is independent of thread scheduling. Two-sided counts |I*| >= |I|.
MoranResult morans_i(const Eigen::Ref<const Vector>& x, const weights::SpatialWeights& w,
                     int permutations = kDefaultPermutations, std::uint64_t seed = 0,
                     Alternative alternative = Alternative::two_sided);

struct Effect {
  std::string name;
  double direct = 0.0;
  double indirect = 0.0;
  double total = 0.0;
  double se_direct = 0.0;
  double se_indirect = 0.0;
  double se_total = 0.0;
  double p_direct = 1.0;
  double p_indirect = 1.0;  // NaN when the lag column was dropped
  double p_total = 1.0;
  bool lag_dropped = false;
};

using EffectsTable = std::vector<Effect>;

struct SlxFit {
  RegressionFit fit;  // design [1, X, WX (kept lags)]
  EffectsTable effects;
  std::vector<std::string> warnings;
};

// SLX on a precomputed lag block. Lag columns that are constant (including all-zero) or belong
// to a constant regressor are dropped with a warning. Effects: direct = beta, indirect = theta,
// total = beta + theta with Var = Var(beta) + Var(theta) + 2 Cov(beta, theta).
SlxFit fit_slx_with_lags(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Matrix>& x,
                         const Eigen::Ref<const Matrix>& lagged_x, const std::vector<std::string>& names = {});

SlxFit fit_slx(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Matrix>& x,
               const weights::SpatialWeights& w, const std::vector<std::string>& names = {});

// Significance conventions: `table` marks 1% / 5% / 10% as ***, **, *;
// `strict` marks 0.1% / 1% / 5%. Thresholds are strict (p < level).
enum class StarConvention { table, strict };

std::string significance_stars(double p_value, StarConvention convention = StarConvention::table);
std::string to_string(StarConvention convention);
std::optional<StarConvention> parse_star_convention(std::string_view text);

}  // namespace spillover::econometrics
