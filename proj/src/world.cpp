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

#include "cotransport/world.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace cotransport::sim {

using nlohmann::json;

Vec3 object_force(const Vec3& hand_pos, const Vec3& ee_pos, const Vec3& hand_vel, const Vec3& ee_vel,
                  const ObjectModel& m) {
  const Vec3 stretch = hand_pos - ee_pos - m.rest_offset;
  return m.stiffness.cwiseProduct(stretch) + m.damping.cwiseProduct(hand_vel - ee_vel);
}

Vec2 clamp_command(const Vec2& v, double v_max) {
  if (!v.allFinite()) throw std::invalid_argument("hand command must be finite");
  const double n = v.norm();
  return n > v_max ? Vec2(v * (v_max / n)) : v;
}

std::uint64_t scan_seed(std::uint64_t seed, std::uint64_t tick, std::uint64_t unit) {
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  return mix(seed ^ mix(2 * tick + unit));
}

std::optional<std::string> collision_check(const Pose2D& base, const Vec2& hand, const Vec2& ee,
                                           const ScenarioSpec& scenario) {
  const Polygon body = robot_outline(base, scenario.robot);
  const Polygon box = object_outline(hand, ee, base.heading, scenario.object);
  for (const auto* group : {&scenario.walls, &scenario.obstacles})
    for (const auto& p : *group)
      if (polygons_intersect(body, p.polygon) || polygons_intersect(box, p.polygon)) return p.name;
  return std::nullopt;
}

namespace {

double lag_gain(double dt, double tau) { return tau > 0.0 ? 1.0 - std::exp(-dt / tau) : 1.0; }

}  // namespace

Simulation::Simulation(ScenarioSpec scenario, std::uint64_t seed)
    : scenario_(std::move(scenario)),
      seed_(seed),
      model_(wbc::WholeBodyModel::mobile_manipulator()),
      world_(scenario_.world()),
      lidars_(scenario_.perception.lidars(scenario_.robot)),
      grid_(perception::OccupancyGrid::centered_on(Vec2::Zero())) {
  scenario_.object.validate();
  scenario_.human.validate();
  scenario_.robot.validate();
  scenario_.perception.validate();
  scenario_.timing.validate();
  scenario_.gains.validate();
  scenario_.admittance.admittance.validate();
  reset();
}

void Simulation::reset() {
  state_ = WorldState{};
  state_.joints = scenario_.initial_joints(model_);
  state_.ee = forward_kinematics(model_, state_.joints);
  state_.human.hand = scenario_.initial_hand().head<2>();
  interface_.emplace(scenario_.admittance, state_.ee);
  grid_ = perception::OccupancyGrid::centered_on(scenario_.robot_start.position,
                                                 scenario_.perception.resolution,
                                                 scenario_.perception.grid_size);
  warning_.emplace(scenario_.warning, scenario_.regions);
  extractor_.emplace(scenario_.perception.cluster);
  perceive();
  state_.collided_with =
      collision_check(base_pose(), state_.human.hand, state_.ee.position.head<2>(), scenario_);
  state_.collision = state_.collided_with.has_value();
}

Pose2D Simulation::operator_pose() const {
  const double h = scenario_.operator_start.heading;
  const Vec2 offset = Pose2D(Vec2::Zero(), h).transform(scenario_.human.grasp_offset);
  return {state_.human.hand - offset, h};
}

bool Simulation::finished() const { return state_.joints.q[0] >= scenario_.finish_x(); }

void Simulation::step(const Vec2& command) {
  const double dt = scenario_.timing.control_dt;
  WorldState& s = state_;

  // 1. Hand.
  s.human.command = clamp_command(command, scenario_.human.v_max);
  s.human.hand_velocity +=
      lag_gain(dt, scenario_.human.time_constant) * (s.human.command - s.human.hand_velocity);
  s.human.hand += s.human.hand_velocity * dt;
  const Vec3 hand(s.human.hand.x(), s.human.hand.y(), scenario_.human.hand_height);
  const Vec3 v_h(s.human.hand_velocity.x(), s.human.hand_velocity.y(), 0.0);

  // 2. Interaction force.
  const Vec3 ee_vel = (whole_body_jacobian(model_, s.joints) * s.qdot).head<3>();
  s.force = object_force(hand, s.ee.position, v_h, ee_vel, scenario_.object);

  // 3. Adaptive interface.
  const double t_next = static_cast<double>(s.tick + 1) * dt;
  const auto out = interface_->step(t_next, s.force, v_h, dt);
  s.v_adm = out.v_adm;
  s.v_d = out.v_d;
  s.alpha = out.alpha;

  // 4-6. Whole-body motion.
  const auto clik = wbc::solve_clik(model_, s.joints, out.target, scenario_.gains);
  s.task_error = clik.error;
  s.qdot += lag_gain(dt, scenario_.robot.drive_time_constant) * (clik.qdot - s.qdot);
  s.joints = model_.clamp_to_limits(wbc::integrate_joints(s.joints, s.qdot, dt));
  s.ee = forward_kinematics(model_, s.joints);

  // 7.
  ++s.tick;
  s.time = t_next;

  // 8.
  s.perceived = false;
  if (s.tick % static_cast<std::uint64_t>(scenario_.timing.perception_divider) == 0) perceive();

  // 9.
  if (auto hit = collision_check(base_pose(), s.human.hand, s.ee.position.head<2>(), scenario_)) {
    s.collision = true;
    if (!s.collided_with) s.collided_with = hit;
  }
}

void Simulation::perceive() {
  WorldState& s = state_;
  const Pose2D base = base_pose();
  s.scans.clear();
  for (std::size_t i = 0; i < lidars_.size(); ++i)
    s.scans.push_back(
        perception::simulate_scan(world_, lidars_[i], base, scan_seed(seed_, s.tick, i), s.time));
  perception::update_costmap(grid_, s.scans);
  s.obstacles = extractor_->extract(grid_);
  s.footprint = warning::footprint_points(scenario_.footprint, base);
  s.warning = warning_->step(s.obstacles, s.footprint);
  s.perceived = true;
}

namespace {

json vec(const Vec2& v) { return json::array({v.x(), v.y()}); }
json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json pose(const Pose2D& p) { return json::array({p.position.x(), p.position.y(), p.heading}); }

json points(const std::vector<Vec2>& pts) {
  json out = json::array();
  for (const auto& p : pts) out.push_back(vec(p));
  return out;
}

json optional_distance(const std::optional<warning::RankedObstacle>& r) {
  return r ? json(r->distance) : json(nullptr);
}

json region_json(const std::optional<warning::Region>& r) {
  return r ? json(std::string(warning::to_string(*r))) : json(nullptr);
}

double millimetre(double v) { return std::round(v * 1000.0) / 1000.0; }

}  // namespace

json telemetry_frame(const Simulation& sim, std::uint64_t seq, bool paused) {
  const WorldState& s = sim.state();
  json f;
  f["kind"] = "frame";
  f["seq"] = seq;
  f["tick"] = s.tick;
  f["time"] = s.time;
  f["paused"] = paused;
  f["scenario"] = sim.scenario().name;
  f["base"] = pose(sim.base_pose());
  f["q"] = std::vector<double>(s.joints.q.data(), s.joints.q.data() + wbc::kDof);
  f["ee"] = {{"position", vec(s.ee.position)},
             {"orientation",
              json::array({s.ee.orientation.w(), s.ee.orientation.x(), s.ee.orientation.y(),
                           s.ee.orientation.z()})}};
  f["hand"] = vec(Vec3(s.human.hand.x(), s.human.hand.y(), sim.scenario().human.hand_height));
  f["hand_velocity"] = vec(s.human.hand_velocity);
  f["command"] = vec(s.human.command);
  f["human"] = pose(sim.operator_pose());
  f["alpha"] = s.alpha;
  f["force"] = vec(s.force);
  f["v_adm"] = vec(s.v_adm);

  json scan = json::array();
  for (const auto& sc : s.scans)
    for (std::size_t i = 0; i < sc.ranges.size(); i += 4)
      if (sc.is_return(i)) {
        const Vec2 p = sc.endpoint(i);
        scan.push_back(json::array({millimetre(p.x()), millimetre(p.y())}));
      }
  f["scan"] = std::move(scan);

  json obstacles = json::array();
  for (const auto& o : s.obstacles)
    obstacles.push_back({{"id", o.cluster_id}, {"vertices", points(o.polygon.vertices())}});
  f["obstacles"] = std::move(obstacles);

  json world = json::array();
  for (const auto* group : {&sim.scenario().walls, &sim.scenario().obstacles})
    for (const auto& p : *group) world.push_back({{"name", p.name}, {"vertices", points(p.polygon.vertices())}});
  f["world"] = std::move(world);

  const auto fp = warning::footprint_points(sim.scenario().footprint, sim.base_pose());
  f["footprint"] = {{"points", points({fp.points.begin(), fp.points.end()})},
                    {"centroid", vec(fp.centroid)},
                    {"heading", fp.heading}};

  const auto& w = s.warning;
  f["vibration"] = {{"region", region_json(w.command.region)}, {"intensity", w.command.intensity}};
  f["warning"] = {
      {"warned_distance", optional_distance(w.selection.warned)},
      {"warned_index", w.selection.warned ? json(w.selection.warned->index) : json(nullptr)},
      {"closest_distance", optional_distance(w.selection.closest)},
      {"closest_region",
       w.selection.closest ? region_json(w.selection.closest->region) : json(nullptr)},
      {"previous_region_distance", optional_distance(w.selection.previous_region_closest)},
      {"switch_suppressed", w.selection.switch_suppressed}};
  f["collision"] = s.collision;
  f["collided_with"] = s.collided_with ? json(*s.collided_with) : json(nullptr);
  f["finished"] = sim.finished();
  return f;
}

}  // namespace cotransport::sim
