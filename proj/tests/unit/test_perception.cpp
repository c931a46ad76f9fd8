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

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <doctest.h>

#include "cotransport/perception.hpp"
#include "perception_oracle.hpp"

using namespace cotransport;
using namespace cotransport::perception;
using namespace oracle;

namespace {

bool is_simple(const std::vector<Vec2>& v) {
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (segments_intersect({v[i], v[(i + 1) % n]}, {v[j], v[(j + 1) % n]})) return false;
    }
  return true;
}

}  // namespace

TEST_CASE("empty world returns the sentinel on every beam") {
  const auto cfg = default_lidars()[0];
  const auto scan = simulate_scan({}, cfg, Pose2D(), 1);
  REQUIRE(scan.ranges.size() == 540);
  for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
    CHECK(scan.ranges[i] == cfg.sentinel());
    CHECK_FALSE(scan.is_return(i));
  }
}

TEST_CASE("wall two metres ahead") {
  LidarConfig cfg;
  const std::vector<Polygon> world{Polygon({{2, -20}, {2.5, -20}, {2.5, 20}, {2, 20}})};
  const auto scan = simulate_scan(world, cfg, Pose2D(), 1);
  for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
    const double a = cfg.beam_angle(static_cast<int>(i));
    if (std::abs(a) < 1.3) CHECK(scan.ranges[i] == doctest::Approx(2.0 / std::cos(a)).epsilon(1e-12));
    if (std::abs(a) > EIGEN_PI / 2) CHECK_FALSE(scan.is_return(i));
  }
  CHECK(cfg.beam_angle(0) == doctest::Approx(-0.75 * EIGEN_PI));
  CHECK(cfg.beam_angle(539) == doctest::Approx(0.75 * EIGEN_PI));
}

TEST_CASE("noise-free scans match brute-force edge intersection") {
  const auto world = sample_world();
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> px(-3.5, 5.5), ang(-EIGEN_PI, EIGEN_PI);
  for (int trial = 0; trial < 20; ++trial) {
    const Pose2D base(px(rng), px(rng) * 0.8, ang(rng));
    for (const auto& cfg : default_lidars()) {
      const auto scan = simulate_scan(world, cfg, base, 42);
      const Pose2D sensor = base.compose(cfg.mount);
      for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
        const double a =
            sensor.heading - cfg.fov / 2 + cfg.fov * static_cast<double>(i) / (cfg.beam_count - 1);
        const double want = brute_force_range(world, sensor.position, a, cfg.max_range);
        if (std::isinf(want)) {
          CHECK(scan.ranges[i] == cfg.sentinel());
        } else {
          CHECK(std::abs(scan.ranges[i] - want) <= 1e-9);
        }
      }
    }
  }
}

TEST_CASE("noisy scans are reproducible from the seed") {
  auto cfg = default_lidars()[0];
  cfg.noise_sigma = 0.01;
  const auto world = sample_world();
  const auto a = simulate_scan(world, cfg, Pose2D(0.5, 0.2, 0.1), 99);
  const auto b = simulate_scan(world, cfg, Pose2D(0.5, 0.2, 0.1), 99);
  const auto c = simulate_scan(world, cfg, Pose2D(0.5, 0.2, 0.1), 100);
  CHECK(a.ranges == b.ranges);
  CHECK(a.ranges != c.ranges);
  for (std::size_t i = 0; i < a.ranges.size(); ++i)
    if (a.is_return(i)) CHECK(a.ranges[i] > 0.0);
}

TEST_CASE("scan log round trip is exact") {
  auto cfg = default_lidars()[1];
  cfg.noise_sigma = 0.02;
  std::vector<LidarScan> scans{simulate_scan(sample_world(), cfg, Pose2D(0.1, 0.2, 0.3), 5, 0.1),
                               simulate_scan(sample_world(), cfg, Pose2D(0.2, 0.2, 0.3), 6, 0.2)};
  std::stringstream ss;
  write_scan_log(ss, scans);
  const auto back = read_scan_log(ss);
  REQUIRE(back.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(back[k].time == scans[k].time);
    CHECK(back[k].ranges == scans[k].ranges);
    CHECK(back[k].sensor_pose.position == scans[k].sensor_pose.position);
    CHECK(back[k].sensor_pose.heading == scans[k].sensor_pose.heading);
  }
  std::stringstream bad("{\"t\": 1}\n");
  CHECK_THROWS_AS(read_scan_log(bad), std::runtime_error);
}

TEST_CASE("costmap marks returns, clears along beams and leaves the rest unknown") {
  auto grid = OccupancyGrid::centered_on(Vec2::Zero());
  LidarConfig cfg;
  cfg.beam_count = 541;
  const std::vector<Polygon> world{Polygon({{2, -0.5}, {2.4, -0.5}, {2.4, 0.5}, {2, 0.5}})};
  const auto scan = simulate_scan(world, cfg, Pose2D(), 1);
  update_costmap(grid, scan);

  CHECK(grid.at(*grid.cell_of({2.01, 0.01})) == CellState::Occupied);
  CHECK(grid.at(*grid.cell_of({1.0, 0.0})) == CellState::Free);
  CHECK(grid.at(*grid.cell_of({3.0, 0.0})) == CellState::Unknown);
  // Beyond the field of view, behind the sensor.
  CHECK(grid.at(*grid.cell_of({-1.0, 0.0})) == CellState::Unknown);
  // A no-return beam clears out to the edge of the window.
  REQUIRE_FALSE(scan.is_return(450));
  const double a = scan.beam_angle(450);
  CHECK(grid.at(*grid.cell_of(5.9 * Vec2(std::cos(a), std::sin(a)))) == CellState::Free);
}

TEST_CASE("a removed obstacle is cleared by the next scan") {
  auto grid = OccupancyGrid::centered_on(Vec2::Zero());
  LidarConfig cfg;
  const std::vector<Polygon> world{Polygon({{2, -0.5}, {2.4, -0.5}, {2.4, 0.5}, {2, 0.5}})};
  update_costmap(grid, simulate_scan(world, cfg, Pose2D(), 1));
  REQUIRE_FALSE(grid.occupied_cells().empty());
  update_costmap(grid, simulate_scan({}, cfg, Pose2D(), 2));
  CHECK(grid.occupied_cells().empty());
}

TEST_CASE("rolling preserves the state of cells that stay in the window") {
  OccupancyGrid grid(0.05, 40, 40, Vec2::Zero());
  const Vec2 p(1.02, 1.03);
  grid.set(*grid.cell_of(p), CellState::Occupied);
  CHECK_FALSE(grid.roll_to_contain({1.0, 1.0}));
  CHECK(grid.roll_to_contain({1.6, 1.0}));
  REQUIRE(grid.cell_of(p));
  CHECK(grid.at(*grid.cell_of(p)) == CellState::Occupied);
  CHECK(grid.occupied_cells().size() == 1);
  const auto c = *grid.cell_of({1.6, 1.0});
  CHECK(c.x == 20);
  CHECK(c.y == 20);
}

TEST_CASE("occupied cells stay within range of the sensors") {
  auto grid = OccupancyGrid::centered_on(Vec2::Zero(), 0.05, 30.0);
  LidarConfig cfg;
  cfg.max_range = 3.0;
  const auto world = sample_world();
  Pose2D base(-2.0, 0.0, 0.0);
  for (int step = 0; step < 20; ++step) {
    base = Pose2D(base.position + Vec2(0.3, 0.0), 0.0);
    const auto scans = std::vector<LidarScan>{simulate_scan(world, cfg, base, step)};
    update_costmap(grid, scans);
    for (const auto& c : grid.occupied_cells())
      CHECK((grid.cell_center(c) - base.position).norm() <= cfg.max_range + grid.resolution());
  }
}

TEST_CASE("bresenham endpoints and connectivity") {
  const auto line = bresenham({0, 0}, {7, -3});
  CHECK(line.front() == CellIndex{0, 0});
  CHECK(line.back() == CellIndex{7, -3});
  for (std::size_t i = 1; i < line.size(); ++i) {
    CHECK(std::abs(line[i].x - line[i - 1].x) <= 1);
    CHECK(std::abs(line[i].y - line[i - 1].y) <= 1);
  }
  CHECK(bresenham({3, 3}, {3, 3}).size() == 1);
}

TEST_CASE("DBSCAN partitions match the transitive-closure oracle on 200 random grids") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double eps = 0.15;
  const int min_pts = 3;
  for (int trial = 0; trial < 200; ++trial) {
    OccupancyGrid grid(0.05, 20, 20, Vec2::Zero());
    const double density = 0.05 + 0.5 * u(rng);
    std::vector<std::pair<int, int>> occ;
    for (int y = 0; y < 20; ++y)
      for (int x = 0; x < 20; ++x)
        if (u(rng) < density) {
          grid.set({x, y}, CellState::Occupied);
          occ.emplace_back(y, x);
        }
    const auto got = as_partition(cluster_occupied(grid, eps, min_pts));
    const auto want = dbscan_oracle(occ, eps / 0.05, min_pts);
    CHECK(got == want);
  }
}

TEST_CASE("concave hull hugs a C-shaped cluster") {
  const auto pts = c_shape();
  const auto poly = extract_polygon(pts).polygon;
  const Polygon convex(convex_hull(pts));
  CHECK(poly.area() < convex.area());
  CHECK(poly.area() > 0.0);
  CHECK(is_simple(poly.vertices()));
  for (const auto& p : pts) CHECK(poly.contains(p));
}

TEST_CASE("hull does not depend on point order") {
  auto pts = c_shape();
  const auto ref = extract_polygon(pts).polygon.vertices();
  std::mt19937_64 rng(8);
  for (int i = 0; i < 10; ++i) {
    std::shuffle(pts.begin(), pts.end(), rng);
    CHECK(extract_polygon(pts).polygon.vertices() == ref);
  }
}

TEST_CASE("single-cell-thick C falls back to the convex hull") {
  // The nearest-neighbour walk cannot use a point twice, so a one-cell spine
  // never gets a concave hull. Thicker annuli do.
  for (int thick = 1; thick <= 2; ++thick) {
    std::vector<Vec2> pts;
    for (int j = 0; j <= 12; ++j)
      for (int i = 0; i <= 12; ++i)
        if (i < thick || j < thick || j > 12 - thick) pts.emplace_back(0.05 * i, 0.05 * j);
    const auto poly = extract_polygon(pts).polygon;
    const double convex = Polygon(convex_hull(pts)).area();
    for (const auto& p : pts) CHECK(poly.contains(p));
    if (thick == 1)
      CHECK(poly.area() == doctest::Approx(convex));
    else
      CHECK(poly.area() < convex);
  }
}

TEST_CASE("degenerate clusters are padded to three vertices") {
  const std::vector<Vec2> line{{0, 0}, {0.2, 0}, {0.1, 0}, {0.05, 0}, {0.15, 0}};
  const auto v = extract_polygon(line).polygon.vertices();
  const std::vector<Vec2> want{{0, 0}, {0.05, 0}, {0.1, 0}, {0.15, 0}, {0.2, 0}, {0.15, 0}, {0.1, 0}, {0.05, 0}};
  CHECK(v == want);

  const std::vector<Vec2> single{{1, 1}, {1, 1}};
  const auto s = extract_polygon(single).polygon.vertices();
  REQUIRE(s.size() == 3);
  CHECK(s[0] == Vec2(1, 1));
  CHECK(s[2] == Vec2(1, 1));

  const std::vector<Vec2> pair{{1, 1}, {2, 1}};
  CHECK(extract_polygon(pair).polygon.size() == 3);
  CHECK_THROWS_AS(extract_polygon(std::vector<Vec2>{}), std::invalid_argument);
}

TEST_CASE("a scanned box becomes one obstacle polygon next to it") {
  auto grid = OccupancyGrid::centered_on(Vec2::Zero());
  const Polygon box = Polygon::rectangle(Pose2D(2.0, 0.3, 0.0), 0.8, 0.6);
  for (const auto& cfg : default_lidars()) update_costmap(grid, simulate_scan({&box, 1}, cfg, Pose2D(), 0));
  const auto obstacles = get_all_obstacles(grid);
  REQUIRE(obstacles.size() == 1);
  for (const auto& v : obstacles[0].polygon.vertices()) {
    CHECK(v.x() >= 1.6 - 0.05);
    CHECK(v.x() <= 2.4 + 0.05);
    CHECK(v.y() >= 0.0 - 0.05);
    CHECK(v.y() <= 0.6 + 0.05);
  }
}
