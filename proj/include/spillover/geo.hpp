#pragma once

#include <spillover/common.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace spillover::geo {

inline constexpr double kEarthRadiusMiles = 3958.8;

using Points = Eigen::Matrix<Scalar, Eigen::Dynamic, 2>;

// Equirectangular projection of lon/lat degrees onto a local plane in miles.
// Longitude is scaled by cos(reference latitude).
class LocalProjection {
 public:
  LocalProjection(double reference_lon, double reference_lat);

  // Reference point at the mean of the given coordinates.
  static LocalProjection centered_on(std::span<const double> lons, std::span<const double> lats);

  Eigen::Vector2d to_miles(double lon, double lat) const;
  Points to_miles(std::span<const double> lons, std::span<const double> lats) const;

  double miles_per_degree_lon() const { return miles_per_deg_lon_; }
  double miles_per_degree_lat() const { return miles_per_deg_lat_; }

 private:
  double ref_lon_;
  double ref_lat_;
  double miles_per_deg_lon_;
  double miles_per_deg_lat_;
};

template <typename DerivedA, typename DerivedB>
Scalar distance(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  return (a - b).norm();
}

// Dense n x n planar distance matrix, zero diagonal.
Matrix pairwise_distances(const Points& points);

// Uniform bucket grid over planar points for radius-bounded nearest queries.
class GridIndex {
 public:
  GridIndex(Points points, double cell_size);

  // Nearest point with distance <= radius. Exact squared-distance ties go to the
  // smaller tie_rank entry (one rank per point), or the smaller index without ranks.
  std::optional<Index> nearest_within(const Eigen::Vector2d& query, double radius,
                                      std::span<const std::size_t> tie_rank = {}) const;

  const Points& points() const { return points_; }

 private:
  std::int64_t cell_coord(double v) const;

  Points points_;
  double cell_size_;
  std::unordered_map<std::uint64_t, std::vector<Index>> cells_;
};

}  // namespace spillover::geo
