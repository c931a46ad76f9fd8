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

#include "cotransport/warning.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cotransport::warning {

std::string_view to_string(Region r) {
  switch (r) {
    case Region::Front: return "front";
    case Region::Right: return "right";
    case Region::Back: return "back";
    case Region::Left: return "left";
  }
  return "?";
}

std::optional<Region> region_from_string(std::string_view s) {
  if (s == "front") return Region::Front;
  if (s == "right") return Region::Right;
  if (s == "back") return Region::Back;
  if (s == "left") return Region::Left;
  return std::nullopt;
}

void FootprintSpec::validate() const {
  if (!(length > 0.0) || !(width > 0.0))
    throw std::invalid_argument("FootprintSpec: dimensions must be positive");
  if (!offset.allFinite() || !std::isfinite(facing))
    throw std::invalid_argument("FootprintSpec: non-finite placement");
}

Footprint footprint_points(const FootprintSpec& spec, const Pose2D& base_pose) {
  spec.validate();
  const Pose2D frame = base_pose.compose(Pose2D(spec.offset, spec.facing));
  const double hl = 0.5 * spec.length, hw = 0.5 * spec.width;
  const std::array<Vec2, 4> corners{Vec2(hl, hw), Vec2(-hl, hw), Vec2(-hl, -hw), Vec2(hl, -hw)};

  Footprint fp;
  for (std::size_t i = 0; i < 4; ++i) fp.points[i] = frame.transform(corners[i]);
  for (std::size_t e = 0; e < 4; ++e) {
    const Vec2& a = corners[e];
    const Vec2& b = corners[(e + 1) % 4];
    fp.points[4 + 2 * e] = frame.transform(a + (b - a) / 3.0);
    fp.points[5 + 2 * e] = frame.transform(a + 2.0 * (b - a) / 3.0);
  }
  fp.centroid = frame.position;
  fp.heading = frame.heading;
  return fp;
}

void RegionAngles::validate() const {
  constexpr double kHalfPi = std::numbers::pi / 2.0;
  if (!(front > 0.0 && front < kHalfPi) || !(back > 0.0 && back < kHalfPi))
    throw std::invalid_argument("RegionAngles: angles must lie in (0, pi/2)");
}

Region classify_bearing(double phi, const RegionAngles& angles) {
  const double a = std::abs(phi);
  if (a <= angles.front) return Region::Front;
  if (std::numbers::pi - a <= angles.back) return Region::Back;
  return phi > 0.0 ? Region::Left : Region::Right;
}

void WarningParams::validate() const {
  if (!(d_crit > 0.0 && d_crit < d_max))
    throw std::invalid_argument("WarningParams: need 0 < d_crit < d_max");
  if (!(switch_ratio > 0.0 && switch_ratio <= 1.0))
    throw std::invalid_argument("WarningParams: switch_ratio must lie in (0, 1]");
}

RankedObstacle rank_obstacle(const Polygon& polygon, const Footprint& fp,
                             const RegionAngles& angles, std::size_t index) {
  const auto pair = point_set_min_pair(fp.points, polygon.vertices());
  const Vec2 v = pair.b - fp.centroid;
  const double phi = wrap_angle(std::atan2(v.y(), v.x()) - fp.heading);
  RankedObstacle r;
  r.index = index;
  r.distance = pair.distance;
  r.region = classify_bearing(phi, angles);
  r.closest_point = pair.b;
  r.footprint_point = pair.a;
  return r;
}

namespace {

const RankedObstacle* closest_of(std::span<const RankedObstacle* const> set) {
  const RankedObstacle* best = nullptr;
  for (const auto* r : set)
    if (!best || r->distance < best->distance) best = r;
  return best;
}

}  // namespace

Selection select_warning(std::span<const RankedObstacle> ranked, std::optional<Region> previous,
                         const WarningParams& params) {
  Selection sel;
  std::vector<const RankedObstacle*> under;
  for (const auto& r : ranked) {
    if (!(r.distance >= 0.0)) throw std::invalid_argument("select_warning: negative distance");
    if (r.distance <= params.d_max) under.push_back(&r);
  }
  if (under.empty()) return sel;

  const RankedObstacle* closest = closest_of(under);
  sel.closest = *closest;

  std::vector<const RankedObstacle*> in_previous;
  if (previous) {
    for (const auto* r : under)
      if (r->region == *previous) in_previous.push_back(r);
  }

  const RankedObstacle* warned = closest;
  if (!in_previous.empty()) {
    const RankedObstacle* prev_closest = closest_of(in_previous);
    sel.previous_region_closest = *prev_closest;
    if (closest->region != *previous &&
        !(closest->distance < prev_closest->distance * params.switch_ratio)) {
      warned = prev_closest;
      sel.switch_suppressed = true;
    }
  }
  sel.warned = *warned;
  sel.region = warned->region;
  return sel;
}

std::optional<double> compute_intensity(double distance, const WarningParams& params) {
  if (!std::isfinite(distance) || distance < 0.0)
    throw std::invalid_argument("compute_intensity: distance must be finite and non-negative");
  if (distance <= params.d_crit) return 1.0;
  if (distance <= params.d_max)
    return 1.0 - (distance - params.d_crit) / (params.d_max - params.d_crit);
  return std::nullopt;
}

ObstacleWarning::ObstacleWarning(const WarningParams& params, const RegionAngles& angles)
    : params_(params), angles_(angles) {
  params_.validate();
  angles_.validate();
}

WarningOutcome ObstacleWarning::step(std::span<const perception::ObstaclePolygon> obstacles,
                                     const Footprint& fp) {
  WarningOutcome out;
  out.ranked.reserve(obstacles.size());
  for (std::size_t i = 0; i < obstacles.size(); ++i)
    out.ranked.push_back(rank_obstacle(obstacles[i].polygon, fp, angles_, i));

  out.selection = select_warning(out.ranked, previous_, params_);
  if (out.selection.warned) {
    out.command.region = out.selection.region;
    out.command.intensity = compute_intensity(out.selection.warned->distance, params_).value_or(0.0);
  }
  previous_ = out.command.region;
  return out;
}

}  // namespace cotransport::warning
