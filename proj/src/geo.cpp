#include <spillover/geo.hpp>

#include <cmath>
#include <numbers>
#include <numeric>

namespace spillover::geo {

LocalProjection::LocalProjection(double reference_lon, double reference_lat)
    : ref_lon_(reference_lon), ref_lat_(reference_lat) {
  const double rad = std::numbers::pi / 180.0;
  miles_per_deg_lat_ = kEarthRadiusMiles * rad;
  miles_per_deg_lon_ = miles_per_deg_lat_ * std::cos(reference_lat * rad);
}

LocalProjection LocalProjection::centered_on(std::span<const double> lons, std::span<const double> lats) {
  if (lons.empty() || lons.size() != lats.size()) {
    throw InvalidArgument("projection needs matching nonempty coordinate lists");
  }
  const double n = static_cast<double>(lons.size());
  return LocalProjection(std::accumulate(lons.begin(), lons.end(), 0.0) / n,
                         std::accumulate(lats.begin(), lats.end(), 0.0) / n);
}

Eigen::Vector2d LocalProjection::to_miles(double lon, double lat) const {
  return {(lon - ref_lon_) * miles_per_deg_lon_, (lat - ref_lat_) * miles_per_deg_lat_};
}

Points LocalProjection::to_miles(std::span<const double> lons, std::span<const double> lats) const {
  if (lons.size() != lats.size()) throw InvalidArgument("coordinate lists differ in length");
  Points out(static_cast<Index>(lons.size()), 2);
  for (std::size_t i = 0; i < lons.size(); ++i) out.row(static_cast<Index>(i)) = to_miles(lons[i], lats[i]).transpose();
  return out;
}

Matrix pairwise_distances(const Points& points) {
  const Index n = points.rows();
  Matrix d = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = (points.row(i) - points.row(j)).norm();
    }
  }
  return d;
}

namespace {

std::uint64_t cell_key(std::int64_t cx, std::int64_t cy) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(cx)) << 32) |
         static_cast<std::uint32_t>(cy);
}

}  // namespace

GridIndex::GridIndex(Points points, double cell_size) : points_(std::move(points)), cell_size_(cell_size) {
  if (!(cell_size_ > 0.0)) throw InvalidArgument("grid cell size must be positive");
  for (Index i = 0; i < points_.rows(); ++i) {
    cells_[cell_key(cell_coord(points_(i, 0)), cell_coord(points_(i, 1)))].push_back(i);
  }
}

std::int64_t GridIndex::cell_coord(double v) const {
  return static_cast<std::int64_t>(std::floor(v / cell_size_));
}

std::optional<Index> GridIndex::nearest_within(const Eigen::Vector2d& query, double radius,
                                               std::span<const std::size_t> tie_rank) const {
  const double r2 = radius * radius;
  std::optional<Index> best;
  double best_d2 = 0.0;
  const auto x0 = cell_coord(query.x() - radius), x1 = cell_coord(query.x() + radius);
  const auto y0 = cell_coord(query.y() - radius), y1 = cell_coord(query.y() + radius);
  for (auto cx = x0; cx <= x1; ++cx) {
    for (auto cy = y0; cy <= y1; ++cy) {
      auto it = cells_.find(cell_key(cx, cy));
      if (it == cells_.end()) continue;
      for (Index i : it->second) {
        const double d2 = (points_.row(i).transpose() - query).squaredNorm();
        if (d2 > r2) continue;
        bool better = !best || d2 < best_d2;
        if (best && d2 == best_d2) {
          better = tie_rank.empty() ? i < *best
                                    : tie_rank[static_cast<std::size_t>(i)] < tie_rank[static_cast<std::size_t>(*best)];
        }
        if (better) {
          best = i;
          best_d2 = d2;
        }
      }
    }
  }
  return best;
}

}  // namespace spillover::geo
