/*
 * Copyright 2026 The Cotransport Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "cotransport/geometry.hpp"

namespace cotransport::perception {

struct LidarConfig {
  Pose2D mount;  // w.r.t. the base frame
  int beam_count{540};
  double fov{1.5 * EIGEN_PI};
  double max_range{10.0};
  double noise_sigma{0.0};

  void validate() const;
  /// Beam angle relative to the sensor heading; beams span [-fov/2, fov/2].
  double beam_angle(int i) const;
  double sentinel() const { return max_range + 1.0; }
};

/// Front and back units, each 270 degrees, together covering the full circle.
std::array<LidarConfig, 2> default_lidars(double base_half_length = 0.45);

struct LidarScan {
  double time{0.0};
  Pose2D sensor_pose;
  double fov{0.0};
  double max_range{0.0};
  std::vector<double> ranges;

  bool is_return(std::size_t i) const { return ranges[i] <= max_range; }
  double beam_angle(std::size_t i) const;
  Vec2 endpoint(std::size_t i) const;
};

/// Ray casts every beam against every polygon edge. Gaussian noise is drawn
/// from a generator seeded with `seed`; noisy returns are clamped to (0, max_range].
LidarScan simulate_scan(std::span<const Polygon> world, const LidarConfig& config,
                        const Pose2D& base_pose, std::uint64_t seed, double time = 0.0);

/// Line-delimited scan log: one JSON object per scan.
void write_scan_log(std::ostream& out, std::span<const LidarScan> scans);
std::vector<LidarScan> read_scan_log(std::istream& in);

enum class CellState : std::uint8_t { Unknown = 0, Free = 1, Occupied = 2 };

struct CellIndex {
  int x{0};
  int y{0};
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// Rolling occupancy grid. Cell (x, y) covers
/// [origin + (x, y) * resolution, origin + (x + 1, y + 1) * resolution).
class OccupancyGrid {
 public:
  OccupancyGrid(double resolution, int width, int height, const Vec2& origin);
  static OccupancyGrid centered_on(const Vec2& center, double resolution = 0.05,
                                   double size = 12.0);

  double resolution() const { return resolution_; }
  int width() const { return width_; }
  int height() const { return height_; }
  const Vec2& origin() const { return origin_; }

  bool in_bounds(const CellIndex& c) const;
  std::optional<CellIndex> cell_of(const Vec2& p) const;
  Vec2 cell_center(const CellIndex& c) const;
  CellState at(const CellIndex& c) const;
  void set(const CellIndex& c, CellState s);

  /// Shifts the window by whole cells so `p` lies at the center whenever it
  /// has left the central 50% box. Overlapping cells keep their state; newly
  /// exposed cells are unknown. Returns true if the grid moved.
  bool roll_to_contain(const Vec2& p);
  void shift(int dx, int dy);

  /// Occupied cells in row-major order (y outer, x inner).
  std::vector<CellIndex> occupied_cells() const;

 private:
  std::size_t offset(const CellIndex& c) const {
    return static_cast<std::size_t>(c.y) * width_ + c.x;
  }
  double resolution_;
  int width_;
  int height_;
  Vec2 origin_;
  std::vector<CellState> cells_;
};

/// Grid-aligned Bresenham line, inclusive of both end cells.
std::vector<CellIndex> bresenham(const CellIndex& from, const CellIndex& to);

/// Integrates one batch of scans: the grid rolls around the first sensor,
/// every beam clears the cells it crosses, then returns mark their end cell
/// occupied. Occupied cells beyond max_range of every scan origin are
/// forgotten.
void update_costmap(OccupancyGrid& grid, std::span<const LidarScan> scans);
void update_costmap(OccupancyGrid& grid, const LidarScan& scan);

using Cluster = std::vector<CellIndex>;

/// DBSCAN over occupied cell centers, visited row-major. Neighborhoods are
/// closed balls of radius eps and include the query cell.
std::vector<Cluster> cluster_occupied(const OccupancyGrid& grid, double eps, int min_pts);

struct ObstaclePolygon {
  Polygon polygon;
  int cluster_id{0};
};

/// k-nearest-neighbour concave hull. Starts at k = 3 and grows k by half
/// until the result is simple and encloses every point; the convex hull is
/// used once k exceeds the point count. Output does not depend on point order.
/// Degenerate clusters are padded: one point repeats three times, two points
/// give [a, b, a], collinear points run out along the line and back.
ObstaclePolygon extract_polygon(std::span<const Vec2> points, int cluster_id = 0);

std::vector<Vec2> convex_hull(std::vector<Vec2> points);

struct ClusterParams {
  double eps{0.15};
  int min_pts{3};
};

std::vector<ObstaclePolygon> get_all_obstacles(const OccupancyGrid& grid,
                                               const ClusterParams& params = {});

/// Same output as get_all_obstacles, but reuses the polygon of any cluster
/// whose cell centers are unchanged since the previous call.
class ObstacleExtractor {
 public:
  explicit ObstacleExtractor(const ClusterParams& params = {}) : params_(params) {}
  std::vector<ObstaclePolygon> extract(const OccupancyGrid& grid);
  void clear() { cache_.clear(); }

 private:
  using Key = std::vector<std::pair<double, double>>;
  ClusterParams params_;
  std::map<Key, Polygon> cache_;
};

}  // namespace cotransport::perception
