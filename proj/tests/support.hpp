#pragma once

// Independent reference computations for tests. Nothing here calls the library's numerics.

#include <spillover/common.hpp>
#include <spillover/geo.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

namespace testing_support {

using spillover::Index;
using spillover::Matrix;
using spillover::Vector;

inline Matrix random_matrix(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = z(rng);
  }
  return m;
}

inline Vector random_vector(std::mt19937_64& rng, Index n) { return random_matrix(rng, n, 1).col(0); }

inline spillover::geo::Points random_points(std::mt19937_64& rng, Index n, double extent) {
  std::uniform_real_distribution<double> u(0.0, extent);
  spillover::geo::Points p(n, 2);
  for (Index i = 0; i < n; ++i) {
    p(i, 0) = u(rng);
    p(i, 1) = u(rng);
  }
  return p;
}

// Dense row-standardized weights built entry by entry: w_ij = d^-power, optional cutoff.
inline Matrix dense_inverse_distance(const spillover::geo::Points& p, int power, double cutoff = INFINITY) {
  const Index n = p.rows();
  Matrix w = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dx = p(i, 0) - p(j, 0), dy = p(i, 1) - p(j, 1);
      const double d = std::sqrt(dx * dx + dy * dy);
      if (d <= cutoff) w(i, j) = std::pow(d, -power);
    }
    const double s = w.row(i).sum();
    if (s > 0.0) w.row(i) /= s;
  }
  return w;
}

// Literal double sum: I = n / S0 * sum_ij w_ij (x_i - m)(x_j - m) / sum_i (x_i - m)^2.
inline double moran_double_sum(const Vector& x, const Matrix& w) {
  const Index n = x.size();
  double mean = 0.0;
  for (Index i = 0; i < n; ++i) mean += x(i);
  mean /= static_cast<double>(n);
  double num = 0.0, s0 = 0.0, den = 0.0;
  for (Index i = 0; i < n; ++i) {
    den += (x(i) - mean) * (x(i) - mean);
    for (Index j = 0; j < n; ++j) {
      num += w(i, j) * (x(i) - mean) * (x(j) - mean);
      s0 += w(i, j);
    }
  }
  return static_cast<double>(n) / s0 * num / den;
}

// beta = (X'X)^-1 X'y through an explicit inverse.
inline Vector normal_equations(const Vector& y, const Matrix& design) {
  const Matrix xtx = design.transpose() * design;
  return xtx.inverse() * (design.transpose() * y);
}

inline Matrix with_intercept(const Matrix& x) {
  Matrix d(x.rows(), x.cols() + 1);
  d.col(0).setOnes();
  d.rightCols(x.cols()) = x;
  return d;
}

}  // namespace testing_support
