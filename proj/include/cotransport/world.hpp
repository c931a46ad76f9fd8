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

#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cotransport/adaptive_interface.hpp"
#include "cotransport/perception.hpp"
#include "cotransport/scenario.hpp"
#include "cotransport/warning.hpp"
#include "cotransport/whole_body.hpp"

namespace cotransport::sim {

/// F = K (hand - ee - rest_offset) + D (hand_vel - ee_vel), applied at the EE.
Vec3 object_force(const Vec3& hand_pos, const Vec3& ee_pos, const Vec3& hand_vel, const Vec3& ee_vel,
                  const ObjectModel& m);

struct HumanState {
  Vec2 hand{Vec2::Zero()};
  Vec2 hand_velocity{Vec2::Zero()};
  /// Last command after the v_max clamp.
  Vec2 command{Vec2::Zero()};
};

/// Clamps a commanded hand velocity to v_max, keeping its direction.
Vec2 clamp_command(const Vec2& v, double v_max);

struct WorldState {
  std::uint64_t tick{0};
  double time{0.0};

  wbc::JointState joints;
  /// Joint velocity actually applied on the last tick (after the drive lag).
  wbc::JointVector qdot{wbc::JointVector::Zero()};
  PoseSE3 ee;
  HumanState human;

  Vec3 force{Vec3::Zero()};
  Vec3 v_adm{Vec3::Zero()};
  Vec3 v_d{Vec3::Zero()};
  double alpha{1.0};
  Vec6 task_error{Vec6::Zero()};

  std::vector<perception::LidarScan> scans;
  std::vector<perception::ObstaclePolygon> obstacles;
  warning::Footprint footprint;
  warning::WarningOutcome warning;
  /// Set on the tick a perception update ran.
  bool perceived{false};

  bool collision{false};
  std::optional<std::string> collided_with;
};

/// Fixed-step world. Tick order:
///   1. hand velocity <- low-pass(clamped command); hand <- hand + v_h dt
///   2. F <- object_force, EE velocity from the previous applied joint velocity
///   3. admittance, adaptive index, fused velocity, reference
///   4. CLIK joint velocity
///   5. drive lag on the joint velocity
///   6. joints <- integrate, clamp to limits
///   7. time advances
///   8. every perception_divider ticks: scans, costmap, obstacles, warning
///   9. ground-truth collision check
class Simulation {
 public:
  Simulation(ScenarioSpec scenario, std::uint64_t seed = 0);

  /// Restores the freshly loaded state.
  void reset();
  void step(const Vec2& command);

  const ScenarioSpec& scenario() const { return scenario_; }
  const WorldState& state() const { return state_; }
  const wbc::WholeBodyModel& model() const { return model_; }
  const perception::OccupancyGrid& grid() const { return grid_; }
  std::uint64_t seed() const { return seed_; }

  Pose2D base_pose() const { return state_.joints.base_pose(); }
  Pose2D operator_pose() const;
  bool finished() const;

 private:
  void perceive();

  ScenarioSpec scenario_;
  std::uint64_t seed_;
  wbc::WholeBodyModel model_;
  std::vector<Polygon> world_;
  std::array<perception::LidarConfig, 2> lidars_;
  WorldState state_;
  std::optional<aci::AdaptiveInterface> interface_;
  perception::OccupancyGrid grid_;
  std::optional<warning::ObstacleWarning> warning_;
  std::optional<perception::ObstacleExtractor> extractor_;
};

/// True iff the robot body or the carried box touches any ground-truth polygon.
/// Returns the name of the first one hit.
std::optional<std::string> collision_check(const Pose2D& base, const Vec2& hand, const Vec2& ee,
                                           const ScenarioSpec& scenario);

/// Deterministic per-scan seed.
std::uint64_t scan_seed(std::uint64_t seed, std::uint64_t tick, std::uint64_t unit);

/// Self-contained telemetry frame.
nlohmann::json telemetry_frame(const Simulation& sim, std::uint64_t seq, bool paused);

}  // namespace cotransport::sim
