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

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cotransport/adaptive_interface.hpp"
#include "cotransport/geometry.hpp"
#include "cotransport/perception.hpp"
#include "cotransport/warning.hpp"
#include "cotransport/whole_body.hpp"

namespace cotransport::sim {

inline constexpr int kScenarioSchemaVersion = 1;

/// Raised for malformed or inconsistent scenario documents. The message
/// starts with the document origin and a JSON pointer to the offending value.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Spring-damper coupling between the operator's grasp and the end effector.
struct ObjectModel {
  Vec3 stiffness{Vec3::Constant(1.0e4)};
  Vec3 damping{Vec3::Constant(300.0)};
  /// hand - EE at rest, world frame. Filled from the start configuration
  /// when the document leaves it out.
  Vec3 rest_offset{Vec3::Zero()};
  Vec3 dimensions{0.8, 0.6, 0.5};
  double mass{1.9};

  void validate() const;
};

struct HumanParams {
  double v_max{1.0};
  /// Low-pass time constant on the commanded hand velocity.
  double time_constant{0.2};
  /// Hand position in the operator's body frame.
  Vec2 grasp_offset{0.3, 0.0};
  double hand_height{0.9};

  void validate() const;
};

struct RobotParams {
  double body_length{0.9};
  double body_width{0.6};
  /// First-order lag between commanded and realized joint velocity.
  double drive_time_constant{0.05};

  void validate() const;
};

struct PerceptionParams {
  int beam_count{540};
  double fov{1.5 * EIGEN_PI};
  double max_range{10.0};
  double noise_sigma{0.0};
  double resolution{0.05};
  double grid_size{12.0};
  perception::ClusterParams cluster;

  void validate() const;
  std::array<perception::LidarConfig, 2> lidars(const RobotParams& robot) const;
};

struct TimingParams {
  double control_dt{0.01};
  int perception_divider{10};  // 10 Hz at the default control rate
  int telemetry_divider{5};    // 20 Hz
  double timeout{120.0};

  void validate() const;
};

struct NamedPolygon {
  std::string name;
  Polygon polygon;
};

struct ScenarioSpec {
  int schema_version{kScenarioSchemaVersion};
  std::string name;

  /// Free space of the room, counter-clockwise.
  Polygon room_outline{Polygon::rectangle(Pose2D(), 1.0, 1.0)};
  double wall_thickness{0.15};
  /// Wall slabs generated from the outline, then fixtures.
  std::vector<NamedPolygon> walls;
  std::vector<NamedPolygon> obstacles;

  Pose2D operator_start;
  Pose2D robot_start;
  /// Distance the base has to travel along +x.
  double finish_line_offset{3.4};

  ObjectModel object;
  HumanParams human;
  RobotParams robot;
  wbc::GainSet gains{wbc::GainSet::reference()};
  aci::InterfaceConfig admittance;
  warning::WarningParams warning;
  warning::RegionAngles regions;
  warning::FootprintSpec footprint;
  PerceptionParams perception;
  TimingParams timing;

  double finish_x() const { return robot_start.position.x() + finish_line_offset; }
  /// Ground-truth geometry: walls, fixtures and obstacles.
  std::vector<Polygon> world() const;
  Vec3 initial_hand() const;
  wbc::JointState initial_joints(const wbc::WholeBodyModel& model) const;
};

/// Parses and validates a scenario document. `origin` prefixes error messages.
ScenarioSpec load_scenario(const std::string& text, const std::string& origin = "<scenario>");
ScenarioSpec load_scenario_file(const std::filesystem::path& path);

/// Robot body rectangle centered on the base.
Polygon robot_outline(const Pose2D& base, const RobotParams& robot);
/// Carried box, centered between the two grasps and aligned with the base heading.
Polygon object_outline(const Vec2& hand, const Vec2& ee, double heading, const ObjectModel& object);

/// Wall slabs of the given thickness just outside each outline edge,
/// extended at both ends so corners are closed.
std::vector<Polygon> wall_slabs(const Polygon& outline, double thickness);

}  // namespace cotransport::sim
