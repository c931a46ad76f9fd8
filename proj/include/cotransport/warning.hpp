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
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cotransport/geometry.hpp"
#include "cotransport/perception.hpp"

namespace cotransport::warning {

/// Belt sectors, relative to the operator's body.
enum class Region { Front, Right, Back, Left };

std::string_view to_string(Region r);
std::optional<Region> region_from_string(std::string_view s);

/// Rectangle enclosing robot, carried object and operator. `offset` places
/// the rectangle center in the base frame; `facing` is the direction the
/// operator faces, relative to the base heading.
struct FootprintSpec {
  double length{2.4};
  double width{0.8};
  Vec2 offset{0.75, 0.0};
  double facing{EIGEN_PI};

  void validate() const;
};

inline constexpr std::size_t kFootprintSamples = 12;

struct Footprint {
  /// Corners first (front-left, back-left, back-right, front-right), then two
  /// interior points per edge in the same counter-clockwise order.
  std::array<Vec2, kFootprintSamples> points;
  Vec2 centroid;
  double heading;
};

Footprint footprint_points(const FootprintSpec& spec, const Pose2D& base_pose);

struct RegionAngles {
  double front{0.23};
  double back{0.70};

  void validate() const;
};

/// Sector of a body-relative bearing phi in (-pi, pi].
Region classify_bearing(double phi, const RegionAngles& angles);

struct WarningParams {
  double d_max{1.1};
  double d_crit{0.2};
  double switch_ratio{0.8};

  void validate() const;
};

struct RankedObstacle {
  std::size_t index{0};  // position in the perceived obstacle list
  double distance{0.0};
  Region region{Region::Front};
  Vec2 closest_point{Vec2::Zero()};
  Vec2 footprint_point{Vec2::Zero()};
};

RankedObstacle rank_obstacle(const Polygon& polygon, const Footprint& fp,
                             const RegionAngles& angles, std::size_t index = 0);

struct Selection {
  std::optional<Region> region;
  std::optional<RankedObstacle> warned;
  /// Globally closest obstacle under d_max.
  std::optional<RankedObstacle> closest;
  /// Closest obstacle under d_max inside the previous region.
  std::optional<RankedObstacle> previous_region_closest;
  /// True when a closer obstacle in another region was held back by the ratio.
  bool switch_suppressed{false};
};

/// Hysteretic single-sector selection. Ties in distance resolve to the lowest index.
Selection select_warning(std::span<const RankedObstacle> ranked, std::optional<Region> previous,
                         const WarningParams& params);

/// 1 up to d_crit, linear down to 0 at d_max, no command beyond d_max.
/// Throws std::invalid_argument for negative or non-finite distances.
std::optional<double> compute_intensity(double distance, const WarningParams& params);

struct VibrationCommand {
  std::optional<Region> region;
  double intensity{0.0};

  friend bool operator==(const VibrationCommand&, const VibrationCommand&) = default;
};

struct WarningOutcome {
  VibrationCommand command;
  Selection selection;
  std::vector<RankedObstacle> ranked;
};

/// Stateful warning stage; remembers the previously warned region.
class ObstacleWarning {
 public:
  ObstacleWarning(const WarningParams& params, const RegionAngles& angles);

  WarningOutcome step(std::span<const perception::ObstaclePolygon> obstacles, const Footprint& fp);

  std::optional<Region> previous_region() const { return previous_; }
  void reset() { previous_.reset(); }
  const WarningParams& params() const { return params_; }
  const RegionAngles& angles() const { return angles_; }

 private:
  WarningParams params_;
  RegionAngles angles_;
  std::optional<Region> previous_;
};

}  // namespace cotransport::warning
