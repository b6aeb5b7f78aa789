#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <vector>

namespace solarcast {

/// Mean Earth radius in kilometres.
inline constexpr double kEarthRadiusKm = 6371.0;

struct GeoCoordinate {
  double lon = 0.0;  // degrees east, (-180, 180]
  double lat = 0.0;  // degrees north, [-90, 90]

  /// Throws ValidationError when out of bounds or not finite.
  void validate() const;
  static GeoCoordinate checked(double lon, double lat) {
    GeoCoordinate c{lon, lat};
    c.validate();
    return c;
  }
  friend bool operator==(const GeoCoordinate&, const GeoCoordinate&) = default;
};

/// Great-circle distance (haversine form) on a sphere of radius `radius`.
template <typename Scalar>
Scalar haversine(Scalar lon1, Scalar lat1, Scalar lon2, Scalar lat2,
                 Scalar radius = Scalar(kEarthRadiusKm)) {
  using std::asin;
  using std::atan2;
  using std::cos;
  using std::sin;
  using std::sqrt;
  const Scalar rad = Scalar(std::numbers::pi) / Scalar(180);
  const Scalar t1 = lat1 * rad;
  const Scalar t2 = lat2 * rad;
  const Scalar dt = (lat2 - lat1) * rad;
  const Scalar dl = (lon2 - lon1) * rad;
  const Scalar st = sin(dt / Scalar(2));
  const Scalar sl = sin(dl / Scalar(2));
  Scalar a = st * st + cos(t1) * cos(t2) * sl * sl;
  if (a > Scalar(1)) a = Scalar(1);
  return radius * Scalar(2) * atan2(sqrt(a), sqrt(Scalar(1) - a));
}

/// Haversine distance in km. Validates both coordinates.
double haversine_distance(const GeoCoordinate& a, const GeoCoordinate& b);

struct GridCell {
  int id = 0;
  GeoCoordinate coord;
};

/// Meteorological grid. Cell ids are unique; at least one cell.
struct SpatialGrid {
  std::vector<GridCell> cells;

  void validate() const;
  const GridCell& cell(int id) const;
  std::vector<GeoCoordinate> coordinates() const;
};

enum class SelectionMode { average, clustered };

/// Representative cells for feature assembly.
///
/// Clustered: one representative per cluster, each a member of its own
/// cluster. Average: no representatives, every cell in cluster 0.
struct GridSelection {
  SelectionMode mode = SelectionMode::average;
  int k = 0;
  std::vector<GridCell> representatives;
  std::map<int, int> assignment;  // cell id -> cluster index
  double objective = 0.0;         // summed squared haversine distance (km^2)

  /// Cell ids used as feature locations: representatives (clustered) or
  /// every assigned cell (average).
  std::vector<int> location_ids() const;
};

struct KMeansOptions {
  std::uint64_t seed = 0;
  int restarts = 10;
  int max_iterations = 100;
};

/// Objective value after each Lloyd assignment step, one trace per restart.
using KMeansTrace = std::vector<std::vector<double>>;

/// Spherical K-means under the haversine distance, best of `restarts`.
///
/// k-means++ seeding, centroids as renormalised 3-D means, ties broken by
/// lowest cell id / cluster index. Empty clusters are reseeded with the
/// cell farthest from its centroid.
GridSelection kmeans_haversine(const SpatialGrid& grid, int k, const KMeansOptions& options = {},
                               KMeansTrace* trace = nullptr);

GridSelection average_selection(const SpatialGrid& grid);

/// Summed squared haversine distance of every cell to its cluster centroid.
double kmeans_objective(const SpatialGrid& grid, const std::map<int, int>& assignment,
                        const std::vector<GeoCoordinate>& centroids);

/// Spherical centroid: 3-D Cartesian mean, renormalised to the sphere.
GeoCoordinate spherical_mean(const std::vector<GeoCoordinate>& points);

}  // namespace solarcast
