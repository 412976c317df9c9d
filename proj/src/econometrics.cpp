#include <spillover/econometrics.hpp>
#include <spillover/random.hpp>

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace spillover::econometrics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_constant(const Eigen::Ref<const Vector>& v) {
  return v.size() == 0 || (v.array() == v(0)).all();
}

// R^2 of projecting y on [1, x] without rank checks; used by VIF.
double auxiliary_r_squared(const Vector& y, const Matrix& x) {
  Matrix design(x.rows(), x.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(x.cols()) = x;
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  const Vector beta = qr.solve(y);
  const double rss = (y - design * beta).squaredNorm();
  const double tss = (y.array() - y.mean()).matrix().squaredNorm();
  if (!(tss > 0.0)) return 1.0;
  return 1.0 - rss / tss;
}

}  // namespace

double t_test_p_value(double t, double degrees_of_freedom) {
  if (std::isnan(t) || !(degrees_of_freedom > 0.0)) return kNaN;
  if (std::isinf(t)) return 0.0;
  boost::math::students_t dist(degrees_of_freedom);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

RegressionFit fit_ols(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Matrix>& x,
                      const std::vector<std::string>& names, bool intercept) {
  const Index n = y.size();
  if (x.rows() != n) throw InvalidArgument("OLS: design rows do not match the response length");
  const Index offset = intercept ? 1 : 0;
  const Index k = x.cols() + offset;
  if (k == 0) throw InvalidArgument("OLS: empty design");
  if (n <= k) throw InvalidArgument("OLS: needs more observations than coefficients");
  if (!names.empty() && static_cast<Index>(names.size()) != x.cols()) {
    throw InvalidArgument("OLS: one name per design column expected");
  }

  Matrix design(n, k);
  if (intercept) design.col(0).setOnes();
  design.rightCols(x.cols()) = x;

  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  if (qr.rank() < k) throw RankDeficient("OLS: design matrix is rank deficient");

  RegressionFit fit;
  fit.n = n;
  fit.k = k;
  if (intercept) fit.names.push_back("const");
  for (Index j = 0; j < x.cols(); ++j) {
    fit.names.push_back(names.empty() ? "x" + std::to_string(j + 1) : names[static_cast<std::size_t>(j)]);
  }

  fit.coefficients = qr.solve(y);
  fit.fitted = design * fit.coefficients;
  fit.residuals = y - fit.fitted;
  fit.rss = fit.residuals.squaredNorm();

  // (X'X)^-1 = P R^-1 R^-T P'
  const Matrix r = qr.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
  const Matrix r_inv = r.triangularView<Eigen::Upper>().solve(Matrix::Identity(k, k));
  const Matrix xtx_inv_permuted = r_inv * r_inv.transpose();
  const auto perm = qr.colsPermutation();
  const Matrix xtx_inv = perm * xtx_inv_permuted * perm.transpose();

  const double dof = static_cast<double>(n - k);
  const double sigma2 = fit.rss / dof;
  fit.covariance = sigma2 * xtx_inv;
  fit.standard_errors = fit.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  fit.t_statistics.resize(k);
  fit.p_values.resize(k);
  for (Index j = 0; j < k; ++j) {
    const double se = fit.standard_errors(j);
    const double beta = fit.coefficients(j);
    const double t = se > 0.0 ? beta / se : (beta == 0.0 ? kNaN : std::copysign(kInf, beta));
    fit.t_statistics(j) = t;
    fit.p_values(j) = t_test_p_value(t, dof);
  }

  const double ybar = intercept ? y.mean() : 0.0;
  const double tss = (y.array() - ybar).matrix().squaredNorm();
  fit.r_squared = tss > 0.0 ? 1.0 - fit.rss / tss : 1.0;
  fit.adjusted_r_squared = 1.0 - (1.0 - fit.r_squared) * static_cast<double>(n - offset) / dof;

  const double nd = static_cast<double>(n);
  fit.log_likelihood = fit.rss > 0.0 ? -0.5 * nd * (std::log(2.0 * std::numbers::pi) + std::log(fit.rss / nd) + 1.0)
                                     : kInf;
  fit.aic = 2.0 * static_cast<double>(k) - 2.0 * fit.log_likelihood;
  return fit;
}

Correlation pearson_correlation(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
  if (x.size() != y.size()) throw InvalidArgument("Pearson: vectors differ in length");
  if (x.size() < 3) throw InvalidArgument("Pearson: needs at least three observations");
  const Vector xc = x.array() - x.mean();
  const Vector yc = y.array() - y.mean();
  const double sxx = xc.squaredNorm(), syy = yc.squaredNorm();
  if (!(sxx > 0.0) || !(syy > 0.0)) throw InvalidArgument("Pearson: zero variance");
  Correlation c;
  c.n = x.size();
  c.r = std::clamp(xc.dot(yc) / std::sqrt(sxx * syy), -1.0, 1.0);
  const double dof = static_cast<double>(c.n - 2);
  if (std::abs(c.r) == 1.0) {
    c.p_value = 0.0;
  } else {
    c.p_value = t_test_p_value(c.r * std::sqrt(dof / (1.0 - c.r * c.r)), dof);
  }
  return c;
}

VifResult vif(const Eigen::Ref<const Matrix>& x) {
  const Index n = x.rows(), m = x.cols();
  if (m < 2) throw InvalidArgument("VIF needs at least two columns");
  if (n <= m) throw InvalidArgument("VIF needs more rows than columns");
  VifResult out;
  out.vif.resize(m);
  out.flagged.resize(static_cast<std::size_t>(m));
  for (Index j = 0; j < m; ++j) {
    Matrix others(n, m - 1);
    for (Index c = 0, o = 0; c < m; ++c) {
      if (c != j) others.col(o++) = x.col(c);
    }
    const Vector target = x.col(j);
    double value;
    if (is_constant(target)) {
      value = kInf;  // a constant column is collinear with the intercept
    } else {
      const double r2 = auxiliary_r_squared(target, others);
      value = (1.0 - r2) <= 1e-12 ? kInf : 1.0 / (1.0 - r2);
    }
    out.vif(j) = value;
    out.flagged[static_cast<std::size_t>(j)] = value >= kVifThreshold;
  }
  return out;
}

MoranResult morans_i(const Eigen::Ref<const Vector>& x, const weights::SpatialWeights& w, int permutations,
                     std::uint64_t seed, Alternative alternative) {
  if (permutations < 0) throw InvalidArgument("permutation count must be nonnegative");
  MoranResult result;
  result.statistic = morans_i_statistic(x, w);
  result.permutations = permutations;
  result.alternative = alternative;
  const Index n = x.size();
  result.expected = -1.0 / static_cast<double>(n - 1);
  if (permutations == 0) {
    result.p_value = kNaN;
    return result;
  }

  const Vector z = x.array() - x.mean();
  const double scale = static_cast<double>(n) / w.total_weight() / z.squaredNorm();
  std::vector<double> null(static_cast<std::size_t>(permutations));
#pragma omp parallel for schedule(static)
  for (int p = 0; p < permutations; ++p) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(p));
    Vector zp = z;
    for (Index i = n - 1; i > 0; --i) {
      const auto j = static_cast<Index>(uniform01(rng) * static_cast<double>(i + 1));
      std::swap(zp(i), zp(std::min(j, i)));
    }
    null[static_cast<std::size_t>(p)] = scale * zp.dot(w.matrix() * zp);
  }

  const double observed = result.statistic;
  std::size_t extreme = 0;
  for (double v : null) {
    switch (alternative) {
      case Alternative::two_sided:
        extreme += std::abs(v) >= std::abs(observed);
        break;
      case Alternative::greater:
        extreme += v >= observed;
        break;
      case Alternative::less:
        extreme += v <= observed;
        break;
    }
  }
  result.p_value = static_cast<double>(1 + extreme) / static_cast<double>(1 + permutations);
  const double mean = std::accumulate(null.begin(), null.end(), 0.0) / static_cast<double>(permutations);
  double ss = 0.0;
  for (double v : null) ss += (v - mean) * (v - mean);
  result.null_mean = mean;
  result.null_sd = permutations > 1 ? std::sqrt(ss / static_cast<double>(permutations - 1)) : 0.0;
  return result;
}

SlxFit fit_slx_with_lags(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Matrix>& x,
                         const Eigen::Ref<const Matrix>& lagged_x, const std::vector<std::string>& names) {
  const Index m = x.cols();
  if (lagged_x.rows() != x.rows() || lagged_x.cols() != m) throw InvalidArgument("SLX: lag block shape mismatch");
  if (!names.empty() && static_cast<Index>(names.size()) != m) throw InvalidArgument("SLX: one name per regressor");
  auto name_of = [&](Index j) { return names.empty() ? "x" + std::to_string(j + 1) : names[static_cast<std::size_t>(j)]; };

  SlxFit slx;
  std::vector<Index> kept;
  for (Index j = 0; j < m; ++j) {
    if (is_constant(x.col(j)) || is_constant(lagged_x.col(j))) {
      slx.warnings.push_back("lag of " + name_of(j) + " dropped: constant column");
    } else {
      kept.push_back(j);
    }
  }

  Matrix design(x.rows(), m + static_cast<Index>(kept.size()));
  design.leftCols(m) = x;
  std::vector<std::string> design_names;
  for (Index j = 0; j < m; ++j) design_names.push_back(name_of(j));
  for (std::size_t c = 0; c < kept.size(); ++c) {
    design.col(m + static_cast<Index>(c)) = lagged_x.col(kept[c]);
    design_names.push_back("W_" + name_of(kept[c]));
  }
  slx.fit = fit_ols(y, design, design_names, true);

  const double dof = static_cast<double>(slx.fit.n - slx.fit.k);
  const auto& cov = slx.fit.covariance;
  std::vector<std::optional<Index>> lag_slot(static_cast<std::size_t>(m));
  for (std::size_t c = 0; c < kept.size(); ++c) lag_slot[static_cast<std::size_t>(kept[c])] = 1 + m + static_cast<Index>(c);

  for (Index j = 0; j < m; ++j) {
    const Index b = 1 + j;
    Effect e;
    e.name = name_of(j);
    e.direct = slx.fit.coefficients(b);
    e.se_direct = slx.fit.standard_errors(b);
    e.p_direct = slx.fit.p_values(b);
    if (auto t = lag_slot[static_cast<std::size_t>(j)]) {
      e.indirect = slx.fit.coefficients(*t);
      e.se_indirect = slx.fit.standard_errors(*t);
      e.p_indirect = slx.fit.p_values(*t);
      e.total = e.direct + e.indirect;
      const double var = cov(b, b) + cov(*t, *t) + 2.0 * cov(b, *t);
      e.se_total = std::sqrt(std::max(var, 0.0));
      const double tt = e.se_total > 0.0 ? e.total / e.se_total : (e.total == 0.0 ? kNaN : std::copysign(kInf, e.total));
      e.p_total = t_test_p_value(tt, dof);
    } else {
      e.lag_dropped = true;
      e.indirect = 0.0;
      e.se_indirect = 0.0;
      e.p_indirect = kNaN;
      e.total = e.direct + e.indirect;
      e.se_total = e.se_direct;
      e.p_total = e.p_direct;
    }
    slx.effects.push_back(std::move(e));
  }
  return slx;
}

SlxFit fit_slx(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Matrix>& x,
               const weights::SpatialWeights& w, const std::vector<std::string>& names) {
  const Matrix lagged = weights::spatial_lag(w, x);
  return fit_slx_with_lags(y, x, lagged, names);
}

std::string significance_stars(double p_value, StarConvention convention) {
  if (std::isnan(p_value)) return "";
  static constexpr std::array<double, 3> table_levels{0.01, 0.05, 0.10};
  static constexpr std::array<double, 3> strict_levels{0.001, 0.01, 0.05};
  const auto& levels = convention == StarConvention::table ? table_levels : strict_levels;
  if (p_value < levels[0]) return "***";
  if (p_value < levels[1]) return "**";
  if (p_value < levels[2]) return "*";
  return "";
}

std::string to_string(StarConvention convention) { return convention == StarConvention::table ? "table" : "strict"; }

std::optional<StarConvention> parse_star_convention(std::string_view text) {
  if (text == "table") return StarConvention::table;
  if (text == "strict") return StarConvention::strict;
  return std::nullopt;
}

}  // namespace spillover::econometrics
