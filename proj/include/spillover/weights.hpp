#pragma once

#include <spillover/common.hpp>
#include <spillover/geo.hpp>
#include <spillover/ingest.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace spillover::weights {

enum class SchemeKind { inverse_distance, inverse_distance_thresholded, inverse_square, knn, contiguity };

struct Scheme {
  SchemeKind kind = SchemeKind::inverse_distance;
  double threshold_miles = 0.0;  // inverse_distance_thresholded only; pairs with d <= threshold kept
  int k = 0;                     // knn only

  static Scheme inverse_distance() { return {SchemeKind::inverse_distance, 0.0, 0}; }
  static Scheme thresholded(double d) { return {SchemeKind::inverse_distance_thresholded, d, 0}; }
  static Scheme inverse_square() { return {SchemeKind::inverse_square, 0.0, 0}; }
  static Scheme knn(int k) { return {SchemeKind::knn, 0.0, k}; }
  static Scheme contiguity() { return {SchemeKind::contiguity, 0.0, 0}; }

  bool operator==(const Scheme&) const = default;
};

// "inverse_distance", "threshold:<miles>", "inverse_square", "knn:<k>", "contiguity".
std::string to_string(const Scheme& scheme);
std::optional<Scheme> parse_scheme(std::string_view text);

// Sparse n x n spatial weights with a zero diagonal. Isolates keep all-zero rows.
class SpatialWeights {
 public:
  SpatialWeights(SparseRowMatrix matrix, Scheme scheme, bool row_standardized);

  Index size() const { return matrix_.rows(); }
  const SparseRowMatrix& matrix() const { return matrix_; }
  const Scheme& scheme() const { return scheme_; }
  bool row_standardized() const { return row_standardized_; }
  const std::vector<Index>& isolates() const { return isolates_; }
  bool empty() const { return matrix_.nonZeros() == 0; }
  Index neighbor_count(Index i) const;
  // Sum of all weights (S0 of Moran's I).
  Scalar total_weight() const;

 private:
  SparseRowMatrix matrix_;
  Scheme scheme_;
  bool row_standardized_;
  std::vector<Index> isolates_;
};

// Scales each nonzero row to sum to one; zero rows stay zero. Idempotent.
SparseRowMatrix row_standardize(const SparseRowMatrix& raw);

// Raw weights per scheme (1/d, 1/d^2, binary kNN, binary contiguity; the thresholded
// variant drops pairs with d > D), then optional row standardization.
// Throws InvalidArgument on n < 2, coincident points, k >= n, or contiguity without adjacency.
SpatialWeights build_weights(const geo::Points& points, const Scheme& scheme,
                             const std::vector<std::vector<std::size_t>>* adjacency = nullptr,
                             bool standardize = true);
SpatialWeights build_weights(const ingest::CbgIndex& index, const Scheme& scheme, bool standardize = true);

// (Wx)_i = sum_j w_ij x_j, column by column for a matrix argument.
template <typename Derived>
MatrixX<typename Derived::Scalar> spatial_lag(const SpatialWeights& w, const Eigen::MatrixBase<Derived>& x) {
  if (x.rows() != w.size()) throw InvalidArgument("spatial lag: length does not match the weight matrix");
  return w.matrix() * x.derived();
}

template <typename Derived>
Vector spatial_lag_vector(const SpatialWeights& w, const Eigen::MatrixBase<Derived>& x) {
  return spatial_lag(w, x).col(0);
}

void write_weights(std::ostream& out, const SpatialWeights& w);

// Every other point per row, sorted by (distance, index). Built once and reused across thresholds.
class DistanceNeighbors {
 public:
  struct Entry {
    Scalar distance;
    Index j;
  };

  // Keeps only pairs with distance <= max_distance when given.
  explicit DistanceNeighbors(const geo::Points& points, std::optional<Scalar> max_distance = std::nullopt);

  Index size() const { return static_cast<Index>(rows_.size()); }
  const std::vector<Entry>& row(Index i) const { return rows_[static_cast<std::size_t>(i)]; }
  Scalar min_distance() const { return min_distance_; }
  Scalar max_distance() const { return max_distance_; }

 private:
  std::vector<std::vector<Entry>> rows_;
  Scalar min_distance_;
  Scalar max_distance_;
};

// Row-standardized thresholded lags of a fixed regressor block for a nondecreasing sequence of
// thresholds. Each advance only visits the neighbors newly inside the threshold.
class ThresholdLagger {
 public:
  // distance_power 1 gives 1/d weights, 2 gives 1/d^2.
  ThresholdLagger(const DistanceNeighbors& neighbors, Matrix x, int distance_power = 1);

  // Throws InvalidArgument when threshold decreases.
  void advance_to(Scalar threshold);

  Scalar threshold() const { return threshold_; }
  Matrix lag() const;
  Index neighbor_count(Index i) const { return static_cast<Index>(cursor_[static_cast<std::size_t>(i)]); }
  Index isolate_count() const;
  Index total_neighbors() const;

 private:
  const DistanceNeighbors& neighbors_;
  Matrix x_;
  int power_;
  Scalar threshold_ = -1.0;
  std::vector<std::size_t> cursor_;
  Matrix raw_sum_;
  Vector weight_sum_;
};

}  // namespace spillover::weights
