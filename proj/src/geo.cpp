#include "solarcast/geo.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <random>
#include <set>
#include <string>

#include "solarcast/error.hpp"

namespace solarcast {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Eigen::Vector3d to_cartesian(const GeoCoordinate& c) {
  const double lat = c.lat * kDeg;
  const double lon = c.lon * kDeg;
  return {std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)};
}

GeoCoordinate from_cartesian(const Eigen::Vector3d& v) {
  const double lat = std::atan2(v.z(), std::hypot(v.x(), v.y())) / kDeg;
  double lon = std::atan2(v.y(), v.x()) / kDeg;
  if (lon <= -180.0) lon += 360.0;
  return {lon, lat};
}

double dist2(const GeoCoordinate& a, const GeoCoordinate& b) {
  const double d = haversine(a.lon, a.lat, b.lon, b.lat);
  return d * d;
}

struct Partition {
  std::vector<int> label;  // per cell position
  std::vector<GeoCoordinate> centroids;
  double objective = 0.0;
};

double objective_of(const std::vector<GridCell>& cells, const Partition& p) {
  double total = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i)
    total += dist2(cells[i].coord, p.centroids[p.label[i]]);
  return total;
}

std::vector<GeoCoordinate> plus_plus_seeds(const std::vector<GridCell>& cells, int k,
                                           std::mt19937_64& rng) {
  const std::size_t n = cells.size();
  std::vector<GeoCoordinate> seeds;
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::size_t pick = first(rng);
  std::vector<bool> used(n, false);
  for (int c = 0; c < k; ++c) {
    used[pick] = true;
    seeds.push_back(cells[pick].coord);
    if (c + 1 == k) break;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      best[i] = std::min(best[i], dist2(cells[i].coord, seeds.back()));
      total += used[i] ? 0.0 : best[i];
    }
    if (total <= 0.0) {
      // duplicated coordinates: fall back to the lowest unused cell
      pick = static_cast<std::size_t>(std::find(used.begin(), used.end(), false) - used.begin());
      continue;
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double target = u(rng);
    pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      target -= best[i];
      if (target <= 0.0) {
        pick = i;
        break;
      }
    }
    if (pick == n) {
      for (std::size_t i = n; i-- > 0;)
        if (!used[i]) {
          pick = i;
          break;
        }
    }
  }
  return seeds;
}

// Lowest cluster index wins ties.
int nearest(const GeoCoordinate& x, const std::vector<GeoCoordinate>& centroids) {
  int arg = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = dist2(x, centroids[c]);
    if (d < best) {
      best = d;
      arg = static_cast<int>(c);
    }
  }
  return arg;
}

Partition lloyd(const std::vector<GridCell>& cells, int k, int max_iterations,
                std::mt19937_64& rng, std::vector<double>* trace) {
  const std::size_t n = cells.size();
  Partition p;
  p.centroids = plus_plus_seeds(cells, k, rng);
  p.label.assign(n, -1);

  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const int c = nearest(cells[i].coord, p.centroids);
      if (c != p.label[i]) {
        p.label[i] = c;
        changed = true;
      }
    }

    // Reseed empty clusters with the cell farthest from its centroid.
    for (int c = 0; c < k; ++c) {
      if (std::find(p.label.begin(), p.label.end(), c) != p.label.end()) continue;
      std::vector<int> sizes(k, 0);
      for (int l : p.label) ++sizes[l];
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (sizes[p.label[i]] < 2) continue;
        const double d = dist2(cells[i].coord, p.centroids[p.label[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far == n) break;  // cannot happen while k <= n
      p.label[far] = c;
      p.centroids[c] = cells[far].coord;
      changed = true;
    }

    const double after_assign = objective_of(cells, p);
    if (trace) trace->push_back(after_assign);
    if (!changed && iter > 0) {
      p.objective = after_assign;
      return p;
    }

    // Centroid step. The renormalised 3-D mean is not the exact minimiser of
    // the squared great-circle distances, so keep the old centroid whenever
    // the candidate would raise the cluster cost.
    for (int c = 0; c < k; ++c) {
      std::vector<GeoCoordinate> members;
      for (std::size_t i = 0; i < n; ++i)
        if (p.label[i] == c) members.push_back(cells[i].coord);
      if (members.empty()) continue;
      const GeoCoordinate candidate = spherical_mean(members);
      double old_cost = 0.0, new_cost = 0.0;
      for (const auto& m : members) {
        old_cost += dist2(m, p.centroids[c]);
        new_cost += dist2(m, candidate);
      }
      if (new_cost <= old_cost) p.centroids[c] = candidate;
    }
    p.objective = objective_of(cells, p);
  }
  p.objective = objective_of(cells, p);
  return p;
}

}  // namespace

void GeoCoordinate::validate() const {
  if (!std::isfinite(lat) || !std::isfinite(lon) || lat < -90.0 || lat > 90.0 || lon <= -180.0 ||
      lon > 180.0)
    throw ValidationError("invalid coordinate (lon=" + std::to_string(lon) +
                          ", lat=" + std::to_string(lat) + ")");
}

double haversine_distance(const GeoCoordinate& a, const GeoCoordinate& b) {
  a.validate();
  b.validate();
  return haversine(a.lon, a.lat, b.lon, b.lat);
}

void SpatialGrid::validate() const {
  if (cells.empty()) throw ValidationError("spatial grid has no cells");
  std::set<int> ids;
  for (const auto& c : cells) {
    c.coord.validate();
    if (!ids.insert(c.id).second)
      throw ValidationError("duplicate grid cell id " + std::to_string(c.id));
  }
}

const GridCell& SpatialGrid::cell(int id) const {
  for (const auto& c : cells)
    if (c.id == id) return c;
  throw ValidationError("unknown grid cell id " + std::to_string(id));
}

std::vector<GeoCoordinate> SpatialGrid::coordinates() const {
  std::vector<GeoCoordinate> out;
  out.reserve(cells.size());
  for (const auto& c : cells) out.push_back(c.coord);
  return out;
}

std::vector<int> GridSelection::location_ids() const {
  std::vector<int> ids;
  if (mode == SelectionMode::clustered) {
    for (const auto& r : representatives) ids.push_back(r.id);
  } else {
    for (const auto& [id, cluster] : assignment) ids.push_back(id);
  }
  return ids;
}

GeoCoordinate spherical_mean(const std::vector<GeoCoordinate>& points) {
  if (points.empty()) throw ValidationError("spherical mean of no points");
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (const auto& p : points) sum += to_cartesian(p);
  if (sum.norm() < 1e-12) return points.front();
  return from_cartesian(sum.normalized());
}

double kmeans_objective(const SpatialGrid& grid, const std::map<int, int>& assignment,
                        const std::vector<GeoCoordinate>& centroids) {
  double total = 0.0;
  for (const auto& c : grid.cells) total += dist2(c.coord, centroids.at(assignment.at(c.id)));
  return total;
}

GridSelection kmeans_haversine(const SpatialGrid& grid, int k, const KMeansOptions& options,
                               KMeansTrace* trace) {
  grid.validate();
  if (k < 1 || k > static_cast<int>(grid.cells.size()))
    throw ValidationError("k must lie in [1, " + std::to_string(grid.cells.size()) + "], got " +
                          std::to_string(k));
  if (options.restarts < 1) throw ValidationError("restarts must be positive");

  std::vector<GridCell> cells = grid.cells;
  std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

  Partition best;
  best.objective = std::numeric_limits<double>::infinity();
  for (int r = 0; r < options.restarts; ++r) {
    std::mt19937_64 rng(options.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(r));
    std::vector<double> local;
    Partition p = lloyd(cells, k, options.max_iterations, rng, trace ? &local : nullptr);
    if (trace) trace->push_back(std::move(local));
    if (p.objective < best.objective) best = std::move(p);
  }

  GridSelection sel;
  sel.mode = SelectionMode::clustered;
  sel.k = k;
  sel.objective = best.objective;
  for (std::size_t i = 0; i < cells.size(); ++i) sel.assignment[cells[i].id] = best.label[i];
  for (int c = 0; c < k; ++c) {
    const GridCell* rep = nullptr;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (best.label[i] != c) continue;
      const double d = dist2(cells[i].coord, best.centroids[c]);
      if (d < best_d) {
        best_d = d;
        rep = &cells[i];
      }
    }
    sel.representatives.push_back(*rep);
  }
  return sel;
}

GridSelection average_selection(const SpatialGrid& grid) {
  grid.validate();
  GridSelection sel;
  sel.mode = SelectionMode::average;
  sel.k = 0;
  for (const auto& c : grid.cells) sel.assignment[c.id] = 0;
  return sel;
}

}  // namespace solarcast
