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

#include "cotransport/perception.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace cotransport::perception {

void LidarConfig::validate() const {
  if (beam_count < 1) throw std::invalid_argument("LidarConfig: beam_count must be >= 1");
  if (!(max_range > 0.0)) throw std::invalid_argument("LidarConfig: max_range must be positive");
  if (!(fov > 0.0) || fov > 2.0 * std::numbers::pi)
    throw std::invalid_argument("LidarConfig: fov must lie in (0, 2 pi]");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("LidarConfig: negative noise sigma");
}

namespace {

double grid_angle(double fov, std::size_t count, std::size_t i) {
  if (count <= 1) return 0.0;
  return -0.5 * fov + fov * static_cast<double>(i) / static_cast<double>(count - 1);
}

}  // namespace

double LidarConfig::beam_angle(int i) const {
  return grid_angle(fov, static_cast<std::size_t>(beam_count), static_cast<std::size_t>(i));
}

std::array<LidarConfig, 2> default_lidars(double base_half_length) {
  LidarConfig front;
  front.mount = Pose2D(base_half_length, 0.0, 0.0);
  LidarConfig back;
  back.mount = Pose2D(-base_half_length, 0.0, std::numbers::pi);
  return {front, back};
}

double LidarScan::beam_angle(std::size_t i) const { return grid_angle(fov, ranges.size(), i); }

Vec2 LidarScan::endpoint(std::size_t i) const {
  const double a = sensor_pose.heading + beam_angle(i);
  const double r = std::min(ranges[i], max_range);
  return sensor_pose.position + r * Vec2(std::cos(a), std::sin(a));
}

LidarScan simulate_scan(std::span<const Polygon> world, const LidarConfig& config,
                        const Pose2D& base_pose, std::uint64_t seed, double time) {
  config.validate();
  LidarScan scan;
  scan.time = time;
  scan.sensor_pose = base_pose.compose(config.mount);
  scan.fov = config.fov;
  scan.max_range = config.max_range;
  scan.ranges.assign(static_cast<std::size_t>(config.beam_count), config.sentinel());

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  const Vec2 origin = scan.sensor_pose.position;
  for (int i = 0; i < config.beam_count; ++i) {
    const double a = scan.sensor_pose.heading + config.beam_angle(i);
    const Vec2 dir(std::cos(a), std::sin(a));
    double best = std::numeric_limits<double>::infinity();
    for (const auto& poly : world) {
      const auto& v = poly.vertices();
      for (std::size_t j = 0; j < v.size(); ++j) {
        const Vec2& p = v[j];
        const Vec2& q = v[(j + 1) % v.size()];
        if (p == q) continue;
        if (auto t = segment_ray_intersection(origin, dir, {p, q}); t && *t < best) best = *t;
      }
    }
    if (best > config.max_range) continue;
    double r = best;
    if (config.noise_sigma > 0.0) {
      r += config.noise_sigma * noise(rng);
      r = std::clamp(r, 1e-6, config.max_range);
    }
    scan.ranges[static_cast<std::size_t>(i)] = r;
  }
  return scan;
}

void write_scan_log(std::ostream& out, std::span<const LidarScan> scans) {
  for (const auto& s : scans) {
    nlohmann::json j;
    j["t"] = s.time;
    j["pose"] = {s.sensor_pose.position.x(), s.sensor_pose.position.y(), s.sensor_pose.heading};
    j["fov"] = s.fov;
    j["max_range"] = s.max_range;
    j["ranges"] = s.ranges;
    out << j.dump() << '\n';
  }
}

std::vector<LidarScan> read_scan_log(std::istream& in) {
  std::vector<LidarScan> scans;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      LidarScan s;
      s.time = j.at("t").get<double>();
      const auto pose = j.at("pose").get<std::vector<double>>();
      if (pose.size() != 3) throw std::runtime_error("pose must have 3 entries");
      s.sensor_pose = Pose2D(pose[0], pose[1], pose[2]);
      s.fov = j.at("fov").get<double>();
      s.max_range = j.at("max_range").get<double>();
      s.ranges = j.at("ranges").get<std::vector<double>>();
      scans.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw std::runtime_error("scan log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return scans;
}

OccupancyGrid::OccupancyGrid(double resolution, int width, int height, const Vec2& origin)
    : resolution_(resolution), width_(width), height_(height), origin_(origin) {
  if (!(resolution > 0.0) || width <= 0 || height <= 0)
    throw std::invalid_argument("OccupancyGrid: invalid dimensions");
  cells_.assign(static_cast<std::size_t>(width) * height, CellState::Unknown);
}

OccupancyGrid OccupancyGrid::centered_on(const Vec2& center, double resolution, double size) {
  const int n = static_cast<int>(std::lround(size / resolution));
  const Vec2 origin = center - Vec2::Constant(0.5 * n * resolution);
  return {resolution, n, n, origin};
}

bool OccupancyGrid::in_bounds(const CellIndex& c) const {
  return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_;
}

namespace {

CellIndex unbounded_cell(const OccupancyGrid& g, const Vec2& p) {
  const Vec2 rel = (p - g.origin()) / g.resolution();
  return {static_cast<int>(std::floor(rel.x())), static_cast<int>(std::floor(rel.y()))};
}

}  // namespace

std::optional<CellIndex> OccupancyGrid::cell_of(const Vec2& p) const {
  const CellIndex c = unbounded_cell(*this, p);
  if (!in_bounds(c)) return std::nullopt;
  return c;
}

Vec2 OccupancyGrid::cell_center(const CellIndex& c) const {
  return origin_ + resolution_ * Vec2(c.x + 0.5, c.y + 0.5);
}

CellState OccupancyGrid::at(const CellIndex& c) const {
  if (!in_bounds(c)) throw std::out_of_range("OccupancyGrid::at: cell outside grid");
  return cells_[offset(c)];
}

void OccupancyGrid::set(const CellIndex& c, CellState s) {
  if (!in_bounds(c)) throw std::out_of_range("OccupancyGrid::set: cell outside grid");
  cells_[offset(c)] = s;
}

void OccupancyGrid::shift(int dx, int dy) {
  if (dx == 0 && dy == 0) return;
  std::vector<CellState> next(cells_.size(), CellState::Unknown);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const CellIndex src{x + dx, y + dy};
      if (in_bounds(src)) next[offset({x, y})] = cells_[offset(src)];
    }
  }
  cells_ = std::move(next);
  origin_ += resolution_ * Vec2(dx, dy);
}

bool OccupancyGrid::roll_to_contain(const Vec2& p) {
  const CellIndex c = unbounded_cell(*this, p);
  const bool inside_x = c.x >= width_ / 4 && c.x < width_ - width_ / 4;
  const bool inside_y = c.y >= height_ / 4 && c.y < height_ - height_ / 4;
  if (inside_x && inside_y) return false;
  shift(c.x - width_ / 2, c.y - height_ / 2);
  return true;
}

std::vector<CellIndex> OccupancyGrid::occupied_cells() const {
  std::vector<CellIndex> out;
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x)
      if (cells_[offset({x, y})] == CellState::Occupied) out.push_back({x, y});
  return out;
}

std::vector<CellIndex> bresenham(const CellIndex& from, const CellIndex& to) {
  std::vector<CellIndex> out;
  int x = from.x, y = from.y;
  const int dx = std::abs(to.x - from.x), dy = -std::abs(to.y - from.y);
  const int sx = from.x < to.x ? 1 : -1, sy = from.y < to.y ? 1 : -1;
  int err = dx + dy;
  out.reserve(static_cast<std::size_t>(std::max(dx, -dy)) + 1);
  while (true) {
    out.push_back({x, y});
    if (x == to.x && y == to.y) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
  return out;
}

void update_costmap(OccupancyGrid& grid, std::span<const LidarScan> scans) {
  if (scans.empty()) return;
  grid.roll_to_contain(scans.front().sensor_pose.position);

  for (const auto& scan : scans) {
    const auto src = grid.cell_of(scan.sensor_pose.position);
    if (!src) throw std::invalid_argument("update_costmap: scan origin outside the grid");
    for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
      const bool hit = scan.is_return(i);
      const CellIndex end = unbounded_cell(grid, scan.endpoint(i));
      const auto line = bresenham(*src, end);
      const std::size_t n = hit ? line.size() - 1 : line.size();
      for (std::size_t k = 0; k < n; ++k) {
        if (!grid.in_bounds(line[k])) break;
        grid.set(line[k], CellState::Free);
      }
    }
  }
  for (const auto& scan : scans) {
    for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
      if (!scan.is_return(i)) continue;
      if (auto c = grid.cell_of(scan.endpoint(i))) grid.set(*c, CellState::Occupied);
    }
  }
  for (const auto& c : grid.occupied_cells()) {
    const Vec2 p = grid.cell_center(c);
    const bool seen = std::any_of(scans.begin(), scans.end(), [&](const LidarScan& s) {
      return (p - s.sensor_pose.position).norm() <= s.max_range + grid.resolution();
    });
    if (!seen) grid.set(c, CellState::Unknown);
  }
}

void update_costmap(OccupancyGrid& grid, const LidarScan& scan) {
  update_costmap(grid, std::span<const LidarScan>(&scan, 1));
}

std::vector<Cluster> cluster_occupied(const OccupancyGrid& grid, double eps, int min_pts) {
  if (!(eps > 0.0)) throw std::invalid_argument("cluster_occupied: eps must be positive");
  if (min_pts < 1) throw std::invalid_argument("cluster_occupied: min_pts must be >= 1");

  const auto cells = grid.occupied_cells();
  const int n = static_cast<int>(cells.size());
  std::vector<int> lookup(static_cast<std::size_t>(grid.width()) * grid.height(), -1);
  for (int i = 0; i < n; ++i)
    lookup[static_cast<std::size_t>(cells[i].y) * grid.width() + cells[i].x] = i;

  const double res = grid.resolution();
  const double eps_tol = eps * (1.0 + 1e-9);
  const int reach = static_cast<int>(std::ceil(eps / res));

  auto neighbours = [&](int i) {
    std::vector<int> out;
    const CellIndex c = cells[i];
    for (int dy = -reach; dy <= reach; ++dy) {
      for (int dx = -reach; dx <= reach; ++dx) {
        const CellIndex o{c.x + dx, c.y + dy};
        if (!grid.in_bounds(o)) continue;
        const int j = lookup[static_cast<std::size_t>(o.y) * grid.width() + o.x];
        if (j < 0) continue;
        if (res * std::hypot(dx, dy) <= eps_tol) out.push_back(j);
      }
    }
    return out;
  };

  constexpr int kUnvisited = -2, kNoise = -1;
  std::vector<int> label(static_cast<std::size_t>(n), kUnvisited);
  std::vector<Cluster> clusters;
  for (int i = 0; i < n; ++i) {
    if (label[i] != kUnvisited) continue;
    const auto seed_nb = neighbours(i);
    if (static_cast<int>(seed_nb.size()) < min_pts) {
      label[i] = kNoise;
      continue;
    }
    const int id = static_cast<int>(clusters.size());
    clusters.emplace_back();
    label[i] = id;
    std::vector<int> frontier(seed_nb.begin(), seed_nb.end());
    for (std::size_t k = 0; k < frontier.size(); ++k) {
      const int j = frontier[k];
      if (label[j] == kNoise) label[j] = id;
      if (label[j] != kUnvisited) continue;
      label[j] = id;
      const auto nb = neighbours(j);
      if (static_cast<int>(nb.size()) >= min_pts) frontier.insert(frontier.end(), nb.begin(), nb.end());
    }
  }
  for (int i = 0; i < n; ++i)
    if (label[i] >= 0) clusters[label[i]].push_back(cells[i]);
  return clusters;
}

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  auto less = [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  };
  std::sort(pts.begin(), pts.end(), less);
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross(hull[k - 1] - hull[k - 2], pts[i - 1] - hull[k - 2]) <= 0.0) --k;
    hull[k++] = pts[i - 1];
  }
  hull.resize(k - 1);
  return hull;
}

namespace {

// Counter-clockwise angle from `back` to `v`, in (0, 2 pi].
double ccw_from(const Vec2& back, const Vec2& v) {
  double a = std::atan2(cross(back, v), back.dot(v));
  if (a <= 0.0) a += 2.0 * std::numbers::pi;
  return a;
}

// Closed bounding boxes of segments ab and cd overlap.
bool boxes_overlap(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  return std::max(a.x(), b.x()) >= std::min(c.x(), d.x()) &&
         std::max(c.x(), d.x()) >= std::min(a.x(), b.x()) &&
         std::max(a.y(), b.y()) >= std::min(c.y(), d.y()) &&
         std::max(c.y(), d.y()) >= std::min(a.y(), b.y());
}

std::optional<std::vector<Vec2>> knn_hull(const std::vector<Vec2>& pts, std::size_t k) {
  const std::size_t n = pts.size();
  std::size_t first = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (pts[i].y() < pts[first].y() || (pts[i].y() == pts[first].y() && pts[i].x() < pts[first].x()))
      first = i;
  }

  std::vector<bool> used(n, false);
  std::vector<std::size_t> hull{first};
  used[first] = true;
  std::size_t remaining = n - 1;
  std::size_t current = first;
  Vec2 back(-1.0, 0.0);
  std::size_t step = 2;

  while ((current != first || step == 2) && remaining > 0) {
    if (step == 5) {
      used[first] = false;
      ++remaining;
    }
    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < n; ++i)
      if (!used[i]) cand.push_back(i);
    const Vec2 c = pts[current];
    auto by_distance = [&](std::size_t a, std::size_t b) {
      const double da = (pts[a] - c).squaredNorm(), db = (pts[b] - c).squaredNorm();
      if (da != db) return da < db;
      return a < b;
    };
    const std::size_t kk = std::min(k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(kk), cand.end(),
                      by_distance);
    cand.resize(kk);
    std::vector<std::pair<double, std::size_t>> turn;
    turn.reserve(kk);
    for (std::size_t i : cand) turn.emplace_back(ccw_from(back, pts[i] - c), i);
    std::sort(turn.begin(), turn.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return by_distance(a.second, b.second);
    });
    for (std::size_t i = 0; i < kk; ++i) cand[i] = turn[i].second;

    std::optional<std::size_t> chosen;
    for (std::size_t cnd : cand) {
      const bool closing = cnd == first;
      bool crosses = false;
      // Edges (hull[j], hull[j + 1]) not touching the current vertex.
      for (std::size_t j = 0; j + 2 < hull.size() && !crosses; ++j) {
        if (closing && j == 0) continue;
        crosses = boxes_overlap(c, pts[cnd], pts[hull[j]], pts[hull[j + 1]]) &&
                  segments_intersect({c, pts[cnd]}, {pts[hull[j]], pts[hull[j + 1]]});
      }
      if (!crosses) {
        chosen = cnd;
        break;
      }
    }
    if (!chosen) return std::nullopt;

    back = c - pts[*chosen];
    current = *chosen;
    used[current] = true;
    --remaining;
    if (current != first) hull.push_back(current);
    ++step;
  }

  if (hull.size() < 3) return std::nullopt;
  if (current != first) {
    // Dataset exhausted: the closing edge must not cross the chain.
    const Segment closing{pts[hull.back()], pts[first]};
    for (std::size_t j = 1; j + 2 < hull.size(); ++j)
      if (segments_intersect(closing, {pts[hull[j]], pts[hull[j + 1]]})) return std::nullopt;
  }

  std::vector<Vec2> verts;
  verts.reserve(hull.size());
  for (auto i : hull) verts.push_back(pts[i]);
  const Polygon poly(verts);
  for (const auto& p : pts)
    if (!poly.contains(p)) return std::nullopt;
  return verts;
}

std::vector<Vec2> pad_degenerate(const std::vector<Vec2>& sorted_unique) {
  const std::size_t n = sorted_unique.size();
  if (n == 1) return {sorted_unique[0], sorted_unique[0], sorted_unique[0]};
  if (n == 2) return {sorted_unique[0], sorted_unique[1], sorted_unique[0]};
  // Collinear: out along the line and back, so every sample stays a vertex.
  std::vector<Vec2> out(sorted_unique.begin(), sorted_unique.end());
  for (std::size_t i = n - 2; i >= 1; --i) out.push_back(sorted_unique[i]);
  return out;
}

}  // namespace

ObstaclePolygon extract_polygon(std::span<const Vec2> points, int cluster_id) {
  if (points.empty()) throw std::invalid_argument("extract_polygon: empty cluster");
  std::vector<Vec2> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  const auto hull = convex_hull(pts);
  if (hull.size() < 3) return {Polygon::degenerate(pad_degenerate(pts)), cluster_id};
  if (pts.size() == 3) return {Polygon(hull), cluster_id};

  // k grows by half each retry; thin wall traces otherwise need dozens of attempts.
  for (std::size_t k = 3; k <= pts.size(); k = std::max(k + 1, k + k / 2)) {
    if (auto h = knn_hull(pts, k)) return {Polygon(std::move(*h)), cluster_id};
  }
  return {Polygon(hull), cluster_id};
}

namespace {

std::vector<Vec2> cluster_points(const OccupancyGrid& grid, const Cluster& cluster) {
  std::vector<Vec2> pts;
  pts.reserve(cluster.size());
  for (const auto& c : cluster) pts.push_back(grid.cell_center(c));
  return pts;
}

}  // namespace

std::vector<ObstaclePolygon> get_all_obstacles(const OccupancyGrid& grid,
                                               const ClusterParams& params) {
  std::vector<ObstaclePolygon> out;
  const auto clusters = cluster_occupied(grid, params.eps, params.min_pts);
  for (std::size_t i = 0; i < clusters.size(); ++i)
    out.push_back(extract_polygon(cluster_points(grid, clusters[i]), static_cast<int>(i)));
  return out;
}

std::vector<ObstaclePolygon> ObstacleExtractor::extract(const OccupancyGrid& grid) {
  std::map<Key, Polygon> next;
  std::vector<ObstaclePolygon> out;
  const auto clusters = cluster_occupied(grid, params_.eps, params_.min_pts);
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const auto pts = cluster_points(grid, clusters[i]);
    Key key;
    key.reserve(pts.size());
    for (const auto& p : pts) key.emplace_back(p.x(), p.y());
    const int id = static_cast<int>(i);
    if (auto it = cache_.find(key); it != cache_.end()) {
      out.push_back({it->second, id});
    } else {
      out.push_back(extract_polygon(pts, id));
    }
    next.emplace(std::move(key), out.back().polygon);
  }
  cache_ = std::move(next);
  return out;
}

}  // namespace cotransport::perception
