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

#include "cotransport/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace cotransport::sim {

using nlohmann::json;

void ObjectModel::validate() const {
  if (!(stiffness.array() >= 0.0).all() || !stiffness.allFinite())
    throw std::invalid_argument("object stiffness must be finite and >= 0");
  if (!(damping.array() >= 0.0).all() || !damping.allFinite())
    throw std::invalid_argument("object damping must be finite and >= 0");
  if (!(dimensions.array() > 0.0).all()) throw std::invalid_argument("object dimensions must be positive");
  if (!(mass > 0.0)) throw std::invalid_argument("object mass must be positive");
  if (!rest_offset.allFinite()) throw std::invalid_argument("object rest_offset must be finite");
}

void HumanParams::validate() const {
  if (!(v_max > 0.0)) throw std::invalid_argument("human v_max must be positive");
  if (!(time_constant >= 0.0)) throw std::invalid_argument("human time_constant must be >= 0");
  if (!grasp_offset.allFinite() || !std::isfinite(hand_height))
    throw std::invalid_argument("human grasp must be finite");
}

void RobotParams::validate() const {
  if (!(body_length > 0.0) || !(body_width > 0.0))
    throw std::invalid_argument("robot body dimensions must be positive");
  if (!(drive_time_constant >= 0.0))
    throw std::invalid_argument("robot drive_time_constant must be >= 0");
}

void PerceptionParams::validate() const {
  perception::LidarConfig probe;
  probe.beam_count = beam_count;
  probe.fov = fov;
  probe.max_range = max_range;
  probe.noise_sigma = noise_sigma;
  probe.validate();
  if (!(resolution > 0.0) || !(grid_size > 4.0 * resolution))
    throw std::invalid_argument("perception grid must be larger than a few cells");
  if (!(cluster.eps > 0.0) || cluster.min_pts < 1)
    throw std::invalid_argument("perception cluster parameters must be positive");
}

std::array<perception::LidarConfig, 2> PerceptionParams::lidars(const RobotParams& robot) const {
  auto units = perception::default_lidars(0.5 * robot.body_length);
  for (auto& u : units) {
    u.beam_count = beam_count;
    u.fov = fov;
    u.max_range = max_range;
    u.noise_sigma = noise_sigma;
  }
  return units;
}

void TimingParams::validate() const {
  if (!(control_dt > 0.0)) throw std::invalid_argument("timing control_dt must be positive");
  if (perception_divider < 1 || telemetry_divider < 1)
    throw std::invalid_argument("timing dividers must be >= 1");
  if (!(timeout > 0.0)) throw std::invalid_argument("timing timeout must be positive");
}

std::vector<Polygon> ScenarioSpec::world() const {
  std::vector<Polygon> out;
  out.reserve(walls.size() + obstacles.size());
  for (const auto& w : walls) out.push_back(w.polygon);
  for (const auto& o : obstacles) out.push_back(o.polygon);
  return out;
}

Vec3 ScenarioSpec::initial_hand() const {
  const Vec2 h = operator_start.transform(human.grasp_offset);
  return {h.x(), h.y(), human.hand_height};
}

wbc::JointState ScenarioSpec::initial_joints(const wbc::WholeBodyModel& model) const {
  wbc::JointState s{model.q_def()};
  s.q[0] = robot_start.position.x();
  s.q[1] = robot_start.position.y();
  s.q[2] = robot_start.heading;
  return s;
}

Polygon robot_outline(const Pose2D& base, const RobotParams& robot) {
  return Polygon::rectangle(base, robot.body_length, robot.body_width);
}

Polygon object_outline(const Vec2& hand, const Vec2& ee, double heading, const ObjectModel& object) {
  return Polygon::rectangle(Pose2D(0.5 * (hand + ee), heading), object.dimensions.x(),
                            object.dimensions.y());
}

std::vector<Polygon> wall_slabs(const Polygon& outline, double thickness) {
  if (!(thickness > 0.0)) throw std::invalid_argument("wall thickness must be positive");
  const auto& v = outline.vertices();
  const double orient = outline.signed_area() > 0.0 ? 1.0 : -1.0;
  std::vector<Polygon> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2 p = v[i], q = v[(i + 1) % v.size()];
    const Vec2 dir = (q - p).normalized();
    const Vec2 outward = orient * Vec2(dir.y(), -dir.x());
    const Vec2 a = p - thickness * dir, b = q + thickness * dir;
    out.emplace_back(std::vector<Vec2>{a, b, b + thickness * outward, a + thickness * outward});
  }
  return out;
}

namespace {

std::string escape_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

struct Loc {
  const std::string* origin;
  std::string pointer;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ScenarioError(*origin + ": " + (pointer.empty() ? "/" : pointer) + ": " + msg);
  }
  Loc operator/(const std::string& key) const { return {origin, pointer + "/" + escape_token(key)}; }
  Loc operator/(std::size_t i) const { return {origin, pointer + "/" + std::to_string(i)}; }
};

double as_number(const json& j, const Loc& at) {
  if (!j.is_number()) at.fail("expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) at.fail("expected a finite number");
  return v;
}

double as_positive(const json& j, const Loc& at) {
  const double v = as_number(j, at);
  if (!(v > 0.0)) at.fail("expected a positive number");
  return v;
}

double as_non_negative(const json& j, const Loc& at) {
  const double v = as_number(j, at);
  if (!(v >= 0.0)) at.fail("expected a number >= 0");
  return v;
}

int as_int(const json& j, const Loc& at) {
  if (!j.is_number_integer()) at.fail("expected an integer");
  return j.get<int>();
}

std::vector<double> as_numbers(const json& j, const Loc& at, std::size_t n) {
  if (!j.is_array() || j.size() != n) at.fail("expected an array of " + std::to_string(n) + " numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(as_number(j[i], at / i));
  return out;
}

Vec2 as_vec2(const json& j, const Loc& at) {
  const auto v = as_numbers(j, at, 2);
  return {v[0], v[1]};
}

Pose2D as_pose(const json& j, const Loc& at) {
  const auto v = as_numbers(j, at, 3);
  return {v[0], v[1], v[2]};
}

// A scalar is broadcast to every axis.
template <int N>
Eigen::Matrix<double, N, 1> as_diagonal(const json& j, const Loc& at) {
  Eigen::Matrix<double, N, 1> out;
  if (j.is_number()) {
    out.setConstant(as_number(j, at));
    return out;
  }
  const auto v = as_numbers(j, at, N);
  for (int i = 0; i < N; ++i) out[i] = v[static_cast<std::size_t>(i)];
  return out;
}

std::vector<Vec2> as_points(const json& j, const Loc& at) {
  if (!j.is_array() || j.size() < 3) at.fail("expected an array of at least 3 [x, y] points");
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_vec2(j[i], at / i));
  return out;
}

/// Object view that remembers which keys were read and rejects the rest.
class Obj {
 public:
  Obj(const json& j, Loc at) : j_(j), at_(std::move(at)) {
    if (!j_.is_object()) at_.fail("expected an object");
  }

  const Loc& loc() const { return at_; }
  bool has(const std::string& key) const { return j_.contains(key); }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& require(const std::string& key) {
    const json* v = find(key);
    if (!v) at_.fail("missing required key \"" + key + "\"");
    return *v;
  }

  template <typename F>
  void optional(const std::string& key, F&& apply) {
    if (const json* v = find(key)) apply(*v, at_ / key);
  }

  void done() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) (at_ / it.key()).fail("unknown key");
  }

 private:
  const json& j_;
  Loc at_;
  std::set<std::string> seen_;
};

NamedPolygon parse_shape(const json& j, const Loc& at) {
  Obj o(j, at);
  NamedPolygon out{"", Polygon::rectangle(Pose2D(), 1.0, 1.0)};
  const json& name = o.require("name");
  if (!name.is_string()) (at / "name").fail("expected a string");
  out.name = name.get<std::string>();
  const bool has_size = o.has("size"), has_vertices = o.has("vertices");
  if (has_size == has_vertices) at.fail("give exactly one of \"size\" or \"vertices\"");
  if (has_size) {
    const Vec2 size = as_vec2(o.require("size"), at / "size");
    if (!(size.array() > 0.0).all()) (at / "size").fail("sizes must be positive");
    const Pose2D pose = as_pose(o.require("pose"), at / "pose");
    out.polygon = Polygon::rectangle(pose, size.x(), size.y());
  } else {
    auto pts = as_points(o.require("vertices"), at / "vertices");
    Pose2D pose;
    o.optional("pose", [&](const json& v, const Loc& l) { pose = as_pose(v, l); });
    try {
      out.polygon = Polygon(std::move(pts)).transformed(pose);
    } catch (const std::invalid_argument& e) {
      (at / "vertices").fail(e.what());
    }
  }
  o.done();
  return out;
}

void parse_object(Obj& o, ObjectModel& m, bool& has_rest) {
  o.optional("stiffness", [&](const json& v, const Loc& l) {
    m.stiffness = as_diagonal<3>(v, l);
    if (!(m.stiffness.array() >= 0.0).all()) l.fail("stiffness must be >= 0");
  });
  o.optional("damping", [&](const json& v, const Loc& l) {
    m.damping = as_diagonal<3>(v, l);
    if (!(m.damping.array() >= 0.0).all()) l.fail("damping must be >= 0");
  });
  o.optional("rest_offset", [&](const json& v, const Loc& l) {
    const auto r = as_numbers(v, l, 3);
    m.rest_offset = Vec3(r[0], r[1], r[2]);
    has_rest = true;
  });
  o.optional("dimensions", [&](const json& v, const Loc& l) {
    const auto d = as_numbers(v, l, 3);
    m.dimensions = Vec3(d[0], d[1], d[2]);
    if (!(m.dimensions.array() > 0.0).all()) l.fail("dimensions must be positive");
  });
  o.optional("mass", [&](const json& v, const Loc& l) { m.mass = as_positive(v, l); });
  o.done();
}

void parse_controller(Obj& o, wbc::GainSet& g) {
  o.optional("K", [&](const json& v, const Loc& l) { g.K = as_diagonal<6>(v, l); });
  o.optional("W1", [&](const json& v, const Loc& l) { g.W1 = as_diagonal<6>(v, l); });
  o.optional("W2", [&](const json& v, const Loc& l) { g.W2 = as_diagonal<wbc::kDof>(v, l); });
  o.optional("W3", [&](const json& v, const Loc& l) { g.W3 = as_diagonal<wbc::kDof>(v, l); });
  o.optional("damping", [&](const json& v, const Loc& l) { g.damping = as_positive(v, l); });
  o.optional("secondary_gain", [&](const json& v, const Loc& l) { g.secondary_gain = as_number(v, l); });
  o.done();
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    o.loc().fail(e.what());
  }
}

void parse_admittance(Obj& o, aci::InterfaceConfig& c) {
  o.optional("mass", [&](const json& v, const Loc& l) {
    c.admittance.mass = as_diagonal<3>(v, l);
    if (!(c.admittance.mass.array() > 0.0).all()) l.fail("mass must be positive");
  });
  o.optional("damping", [&](const json& v, const Loc& l) {
    c.admittance.damping = as_diagonal<3>(v, l);
    if (!(c.admittance.damping.array() > 0.0).all()) l.fail("damping must be positive");
  });
  o.optional("window", [&](const json& v, const Loc& l) { c.window_length = as_positive(v, l); });
  o.optional("epsilon", [&](const json& v, const Loc& l) { c.epsilon = as_non_negative(v, l); });
  o.optional("force_filter_time_constant",
             [&](const json& v, const Loc& l) { c.force_filter_time_constant = as_non_negative(v, l); });
  o.done();
}

void parse_warning(Obj& o, ScenarioSpec& s) {
  o.optional("d_max", [&](const json& v, const Loc& l) { s.warning.d_max = as_positive(v, l); });
  o.optional("d_crit", [&](const json& v, const Loc& l) { s.warning.d_crit = as_positive(v, l); });
  o.optional("switch_ratio", [&](const json& v, const Loc& l) { s.warning.switch_ratio = as_positive(v, l); });
  o.optional("theta_front", [&](const json& v, const Loc& l) { s.regions.front = as_positive(v, l); });
  o.optional("theta_back", [&](const json& v, const Loc& l) { s.regions.back = as_positive(v, l); });
  o.optional("footprint", [&](const json& v, const Loc& l) {
    Obj f(v, l);
    f.optional("length", [&](const json& x, const Loc& xl) { s.footprint.length = as_positive(x, xl); });
    f.optional("width", [&](const json& x, const Loc& xl) { s.footprint.width = as_positive(x, xl); });
    f.optional("offset", [&](const json& x, const Loc& xl) { s.footprint.offset = as_vec2(x, xl); });
    f.optional("facing", [&](const json& x, const Loc& xl) { s.footprint.facing = as_number(x, xl); });
    f.done();
  });
  o.done();
  try {
    s.warning.validate();
    s.regions.validate();
  } catch (const std::invalid_argument& e) {
    o.loc().fail(e.what());
  }
}

void parse_perception(Obj& o, PerceptionParams& p) {
  o.optional("beam_count", [&](const json& v, const Loc& l) { p.beam_count = as_int(v, l); });
  o.optional("fov", [&](const json& v, const Loc& l) { p.fov = as_positive(v, l); });
  o.optional("max_range", [&](const json& v, const Loc& l) { p.max_range = as_positive(v, l); });
  o.optional("noise_sigma", [&](const json& v, const Loc& l) { p.noise_sigma = as_non_negative(v, l); });
  o.optional("resolution", [&](const json& v, const Loc& l) { p.resolution = as_positive(v, l); });
  o.optional("grid_size", [&](const json& v, const Loc& l) { p.grid_size = as_positive(v, l); });
  o.optional("cluster_eps", [&](const json& v, const Loc& l) { p.cluster.eps = as_positive(v, l); });
  o.optional("cluster_min_points", [&](const json& v, const Loc& l) { p.cluster.min_pts = as_int(v, l); });
  o.done();
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    o.loc().fail(e.what());
  }
}

void parse_human(Obj& o, HumanParams& h) {
  o.optional("v_max", [&](const json& v, const Loc& l) { h.v_max = as_positive(v, l); });
  o.optional("time_constant", [&](const json& v, const Loc& l) { h.time_constant = as_non_negative(v, l); });
  o.optional("grasp_offset", [&](const json& v, const Loc& l) { h.grasp_offset = as_vec2(v, l); });
  o.optional("hand_height", [&](const json& v, const Loc& l) { h.hand_height = as_number(v, l); });
  o.done();
}

void parse_robot(Obj& o, RobotParams& r) {
  o.optional("body_length", [&](const json& v, const Loc& l) { r.body_length = as_positive(v, l); });
  o.optional("body_width", [&](const json& v, const Loc& l) { r.body_width = as_positive(v, l); });
  o.optional("drive_time_constant",
             [&](const json& v, const Loc& l) { r.drive_time_constant = as_non_negative(v, l); });
  o.done();
}

void parse_timing(Obj& o, TimingParams& t) {
  o.optional("control_dt", [&](const json& v, const Loc& l) { t.control_dt = as_positive(v, l); });
  o.optional("perception_divider", [&](const json& v, const Loc& l) {
    t.perception_divider = as_int(v, l);
    if (t.perception_divider < 1) l.fail("expected an integer >= 1");
  });
  o.optional("telemetry_divider", [&](const json& v, const Loc& l) {
    t.telemetry_divider = as_int(v, l);
    if (t.telemetry_divider < 1) l.fail("expected an integer >= 1");
  });
  o.optional("timeout", [&](const json& v, const Loc& l) { t.timeout = as_positive(v, l); });
  o.done();
}

template <typename F>
void section(Obj& root, const std::string& key, F&& parse) {
  root.optional(key, [&](const json& v, const Loc& l) {
    Obj o(v, l);
    parse(o);
  });
}

bool inside(const Polygon& room, const Polygon& p) {
  return std::all_of(p.vertices().begin(), p.vertices().end(),
                     [&](const Vec2& v) { return room.contains(v); });
}

void check_consistency(ScenarioSpec& s, bool has_rest, const Loc& root) {
  for (std::size_t i = 0; i < s.obstacles.size(); ++i)
    if (!inside(s.room_outline, s.obstacles[i].polygon))
      (root / "obstacles" / i).fail("obstacle \"" + s.obstacles[i].name + "\" lies outside the room");

  const Vec2 finish(s.finish_x(), s.robot_start.position.y());
  if (!s.room_outline.contains(finish)) (root / "finish_line_offset").fail("finish line lies outside the room");

  const auto model = wbc::WholeBodyModel::mobile_manipulator();
  const Vec3 ee = forward_kinematics(model, s.initial_joints(model)).position;
  const Vec3 hand = s.initial_hand();
  if (has_rest) {
    const double gap = (hand - ee - s.object.rest_offset).norm();
    if (gap > 0.05)
      (root / "object" / "rest_offset")
          .fail("start poses leave the object stretched by " + std::to_string(gap) + " m");
  } else {
    s.object.rest_offset = hand - ee;
  }

  const Polygon body = robot_outline(s.robot_start, s.robot);
  const Polygon box = object_outline(hand.head<2>(), ee.head<2>(), s.robot_start.heading, s.object);
  auto check_clear = [&](const NamedPolygon& p, const Loc& at) {
    if (polygons_intersect(body, p.polygon) || polygons_intersect(box, p.polygon))
      at.fail("robot or object overlaps \"" + p.name + "\" at the start");
  };
  for (std::size_t i = 0; i < s.walls.size(); ++i) check_clear(s.walls[i], root / "room");
  for (std::size_t i = 0; i < s.obstacles.size(); ++i) check_clear(s.obstacles[i], root / "obstacles" / i);
  if (!s.room_outline.contains(s.operator_start.position))
    (root / "operator_start").fail("operator starts outside the room");
}

}  // namespace

ScenarioSpec load_scenario(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(origin + ": malformed document: " + e.what());
  }
  const Loc root{&origin, ""};
  Obj o(doc, root);
  ScenarioSpec s;

  const json& version = o.require("schema_version");
  if (as_int(version, root / "schema_version") != kScenarioSchemaVersion)
    (root / "schema_version").fail("unsupported schema version (expected 1)");
  const json& name = o.require("name");
  if (!name.is_string()) (root / "name").fail("expected a string");
  s.name = name.get<std::string>();

  {
    const Loc at = root / "room";
    Obj room(o.require("room"), at);
    auto outline = as_points(room.require("outline"), at / "outline");
    try {
      s.room_outline = Polygon(outline);
    } catch (const std::invalid_argument& e) {
      (at / "outline").fail(e.what());
    }
    if (s.room_outline.signed_area() < 0.0) {
      std::reverse(outline.begin(), outline.end());
      s.room_outline = Polygon(outline);
    }
    if (!(s.room_outline.area() > 0.0)) (at / "outline").fail("room outline has no area");
    room.optional("wall_thickness", [&](const json& v, const Loc& l) { s.wall_thickness = as_positive(v, l); });
    const auto slabs = wall_slabs(s.room_outline, s.wall_thickness);
    for (std::size_t i = 0; i < slabs.size(); ++i) s.walls.push_back({"wall" + std::to_string(i), slabs[i]});
    room.optional("fixtures", [&](const json& v, const Loc& l) {
      if (!v.is_array()) l.fail("expected an array");
      for (std::size_t i = 0; i < v.size(); ++i) {
        auto f = parse_shape(v[i], l / i);
        if (!inside(s.room_outline, f.polygon)) (l / i).fail("fixture lies outside the room");
        s.walls.push_back(std::move(f));
      }
    });
    room.done();
  }

  o.optional("obstacles", [&](const json& v, const Loc& l) {
    if (!v.is_array()) l.fail("expected an array");
    for (std::size_t i = 0; i < v.size(); ++i) s.obstacles.push_back(parse_shape(v[i], l / i));
  });
  s.operator_start = as_pose(o.require("operator_start"), root / "operator_start");
  s.robot_start = as_pose(o.require("robot_start"), root / "robot_start");
  o.optional("finish_line_offset", [&](const json& v, const Loc& l) { s.finish_line_offset = as_positive(v, l); });

  bool has_rest = false;
  section(o, "object", [&](Obj& x) { parse_object(x, s.object, has_rest); });
  section(o, "controller", [&](Obj& x) { parse_controller(x, s.gains); });
  section(o, "admittance", [&](Obj& x) { parse_admittance(x, s.admittance); });
  section(o, "warning", [&](Obj& x) { parse_warning(x, s); });
  section(o, "perception", [&](Obj& x) { parse_perception(x, s.perception); });
  section(o, "human", [&](Obj& x) { parse_human(x, s.human); });
  section(o, "robot", [&](Obj& x) { parse_robot(x, s.robot); });
  section(o, "timing", [&](Obj& x) { parse_timing(x, s.timing); });
  o.done();

  check_consistency(s, has_rest, root);
  return s;
}

ScenarioSpec load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_scenario(ss.str(), path.string());
}

}  // namespace cotransport::sim
