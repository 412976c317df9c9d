#include <spillover/weights.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>

namespace spillover::weights {

std::string to_string(const Scheme& scheme) {
  switch (scheme.kind) {
    case SchemeKind::inverse_distance:
      return "inverse_distance";
    case SchemeKind::inverse_distance_thresholded:
      return "threshold:" + csv::format_number(scheme.threshold_miles);
    case SchemeKind::inverse_square:
      return "inverse_square";
    case SchemeKind::knn:
      return "knn:" + std::to_string(scheme.k);
    case SchemeKind::contiguity:
      return "contiguity";
  }
  return "inverse_distance";
}

std::optional<Scheme> parse_scheme(std::string_view text) {
  if (text == "inverse_distance") return Scheme::inverse_distance();
  if (text == "inverse_square") return Scheme::inverse_square();
  if (text == "contiguity") return Scheme::contiguity();
  if (text.starts_with("threshold:")) {
    auto d = csv::parse_double(text.substr(10));
    if (d && *d >= 0.0) return Scheme::thresholded(*d);
    return std::nullopt;
  }
  if (text.starts_with("knn:")) {
    auto k = csv::parse_integer(text.substr(4));
    if (k && *k > 0) return Scheme::knn(static_cast<int>(*k));
  }
  return std::nullopt;
}

SpatialWeights::SpatialWeights(SparseRowMatrix matrix, Scheme scheme, bool row_standardized)
    : matrix_(std::move(matrix)), scheme_(scheme), row_standardized_(row_standardized) {
  matrix_.makeCompressed();
  for (Index i = 0; i < matrix_.rows(); ++i) {
    if (neighbor_count(i) == 0) isolates_.push_back(i);
  }
}

Index SpatialWeights::neighbor_count(Index i) const {
  Index count = 0;
  for (SparseRowMatrix::InnerIterator it(matrix_, i); it; ++it) {
    if (it.value() != 0.0) ++count;
  }
  return count;
}

Scalar SpatialWeights::total_weight() const {
  Scalar s = 0.0;
  for (Index i = 0; i < matrix_.rows(); ++i) {
    for (SparseRowMatrix::InnerIterator it(matrix_, i); it; ++it) s += it.value();
  }
  return s;
}

SparseRowMatrix row_standardize(const SparseRowMatrix& raw) {
  SparseRowMatrix out = raw;
  for (Index i = 0; i < out.rows(); ++i) {
    Scalar sum = 0.0;
    for (SparseRowMatrix::InnerIterator it(out, i); it; ++it) sum += it.value();
    if (sum == 0.0 || sum == 1.0) continue;
    for (SparseRowMatrix::InnerIterator it(out, i); it; ++it) it.valueRef() /= sum;
  }
  return out;
}

namespace {

void check_distinct(const geo::Points& points) {
  const Index n = points.rows();
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return std::pair(points(a, 0), points(a, 1)) < std::pair(points(b, 0), points(b, 1));
  });
  for (std::size_t k = 1; k < order.size(); ++k) {
    if (points.row(order[k]) == points.row(order[k - 1])) {
      throw InvalidArgument("coincident centroids at indices " + std::to_string(order[k - 1]) + " and " +
                            std::to_string(order[k]));
    }
  }
}

}  // namespace

SpatialWeights build_weights(const geo::Points& points, const Scheme& scheme,
                             const std::vector<std::vector<std::size_t>>* adjacency, bool standardize) {
  const Index n = points.rows();
  if (n < 2) throw InvalidArgument("weights need at least two units");
  check_distinct(points);

  std::vector<std::vector<std::pair<Index, Scalar>>> rows(static_cast<std::size_t>(n));
  switch (scheme.kind) {
    case SchemeKind::inverse_distance:
    case SchemeKind::inverse_distance_thresholded:
    case SchemeKind::inverse_square: {
      const bool thresholded = scheme.kind == SchemeKind::inverse_distance_thresholded;
      const bool square = scheme.kind == SchemeKind::inverse_square;
#pragma omp parallel for schedule(static)
      for (Index i = 0; i < n; ++i) {
        auto& row = rows[static_cast<std::size_t>(i)];
        for (Index j = 0; j < n; ++j) {
          if (j == i) continue;
          const Scalar d = (points.row(i) - points.row(j)).norm();
          if (thresholded && d > scheme.threshold_miles) continue;
          row.emplace_back(j, square ? 1.0 / (d * d) : 1.0 / d);
        }
      }
      break;
    }
    case SchemeKind::knn: {
      if (scheme.k <= 0 || scheme.k >= n) throw InvalidArgument("knn needs 0 < k < n");
      const auto k = static_cast<std::size_t>(scheme.k);
#pragma omp parallel for schedule(static)
      for (Index i = 0; i < n; ++i) {
        std::vector<std::pair<Scalar, Index>> cand;
        cand.reserve(static_cast<std::size_t>(n - 1));
        for (Index j = 0; j < n; ++j) {
          if (j != i) cand.emplace_back((points.row(i) - points.row(j)).norm(), j);
        }
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
        auto& row = rows[static_cast<std::size_t>(i)];
        for (std::size_t m = 0; m < k; ++m) row.emplace_back(cand[m].second, 1.0);
        std::sort(row.begin(), row.end());
      }
      break;
    }
    case SchemeKind::contiguity: {
      if (!adjacency || adjacency->size() != static_cast<std::size_t>(n)) {
        throw InvalidArgument("contiguity weights need an adjacency list per unit");
      }
      // Union of both directions.
      std::vector<std::vector<Index>> sym(static_cast<std::size_t>(n));
      for (std::size_t i = 0; i < adjacency->size(); ++i) {
        for (std::size_t j : (*adjacency)[i]) {
          if (j == i || j >= static_cast<std::size_t>(n)) continue;
          sym[i].push_back(static_cast<Index>(j));
          sym[j].push_back(static_cast<Index>(i));
        }
      }
      for (std::size_t i = 0; i < sym.size(); ++i) {
        std::sort(sym[i].begin(), sym[i].end());
        sym[i].erase(std::unique(sym[i].begin(), sym[i].end()), sym[i].end());
        for (Index j : sym[i]) rows[i].emplace_back(j, 1.0);
      }
      break;
    }
  }

  std::vector<Eigen::Triplet<Scalar>> triplets;
  for (Index i = 0; i < n; ++i) {
    for (const auto& [j, v] : rows[static_cast<std::size_t>(i)]) triplets.emplace_back(i, j, v);
  }
  SparseRowMatrix raw(n, n);
  raw.setFromTriplets(triplets.begin(), triplets.end());
  return SpatialWeights(standardize ? row_standardize(raw) : std::move(raw), scheme, standardize);
}

SpatialWeights build_weights(const ingest::CbgIndex& index, const Scheme& scheme, bool standardize) {
  return build_weights(index.planar_centroids(), scheme, &index.adjacency(), standardize);
}

void write_weights(std::ostream& out, const SpatialWeights& w) {
  csv::Writer writer(out);
  writer.row({"i", "j", "weight"});
  for (Index i = 0; i < w.size(); ++i) {
    for (SparseRowMatrix::InnerIterator it(w.matrix(), i); it; ++it) {
      writer.row({std::to_string(i), std::to_string(it.col()), csv::format_number(it.value())});
    }
  }
}

DistanceNeighbors::DistanceNeighbors(const geo::Points& points, std::optional<Scalar> max_distance)
    : rows_(static_cast<std::size_t>(points.rows())),
      min_distance_(std::numeric_limits<Scalar>::infinity()),
      max_distance_(0.0) {
  const Index n = points.rows();
  if (n < 2) throw InvalidArgument("distance neighbors need at least two units");
  check_distinct(points);
  const Scalar cap = max_distance.value_or(std::numeric_limits<Scalar>::infinity());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    auto& row = rows_[static_cast<std::size_t>(i)];
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const Scalar d = (points.row(i) - points.row(j)).norm();
      if (d <= cap) row.push_back({d, j});
    }
    std::sort(row.begin(), row.end(),
              [](const Entry& a, const Entry& b) { return a.distance < b.distance || (a.distance == b.distance && a.j < b.j); });
  }
  for (const auto& row : rows_) {
    if (row.empty()) continue;
    min_distance_ = std::min(min_distance_, row.front().distance);
    max_distance_ = std::max(max_distance_, row.back().distance);
  }
}

ThresholdLagger::ThresholdLagger(const DistanceNeighbors& neighbors, Matrix x, int distance_power)
    : neighbors_(neighbors),
      x_(std::move(x)),
      power_(distance_power),
      cursor_(static_cast<std::size_t>(neighbors.size()), 0),
      raw_sum_(Matrix::Zero(neighbors.size(), x_.cols())),
      weight_sum_(Vector::Zero(neighbors.size())) {
  if (x_.rows() != neighbors.size()) throw InvalidArgument("lagged block does not match the neighbor table");
  if (power_ != 1 && power_ != 2) throw InvalidArgument("distance power must be 1 or 2");
}

void ThresholdLagger::advance_to(Scalar threshold) {
  if (threshold < threshold_) throw InvalidArgument("thresholds must be nondecreasing");
  threshold_ = threshold;
  const Index n = neighbors_.size();
#pragma omp parallel for schedule(dynamic, 64)
  for (Index i = 0; i < n; ++i) {
    const auto& row = neighbors_.row(i);
    auto& c = cursor_[static_cast<std::size_t>(i)];
    while (c < row.size() && row[c].distance <= threshold) {
      const Scalar d = row[c].distance;
      const Scalar w = power_ == 1 ? 1.0 / d : 1.0 / (d * d);
      raw_sum_.row(i) += w * x_.row(row[c].j);
      weight_sum_(i) += w;
      ++c;
    }
  }
}

Matrix ThresholdLagger::lag() const {
  Matrix out = Matrix::Zero(raw_sum_.rows(), raw_sum_.cols());
  for (Index i = 0; i < out.rows(); ++i) {
    if (weight_sum_(i) > 0.0) out.row(i) = raw_sum_.row(i) / weight_sum_(i);
  }
  return out;
}

Index ThresholdLagger::isolate_count() const {
  return static_cast<Index>(std::count(cursor_.begin(), cursor_.end(), std::size_t{0}));
}

Index ThresholdLagger::total_neighbors() const {
  Index total = 0;
  for (auto c : cursor_) total += static_cast<Index>(c);
  return total;
}

}  // namespace spillover::weights
