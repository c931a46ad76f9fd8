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

#include <cmath>
#include <random>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "cotransport/world.hpp"

using namespace cotransport;
using namespace cotransport::sim;

namespace {

ScenarioSpec bundled(const std::string& name) {
  return load_scenario_file(std::string(COTRANSPORT_SCENARIO_DIR) + "/" + name + ".json");
}

}  // namespace

TEST_CASE("object force follows the spring-damper law") {
  ObjectModel m;
  m.rest_offset = Vec3(0.4, 0.0, 0.0);
  const Vec3 ee(1.0, 0.5, 0.9);
  CHECK(object_force(ee + m.rest_offset, ee, Vec3::Zero(), Vec3::Zero(), m).norm() < 1e-9);

  m.stiffness = Vec3::Constant(1000.0);
  m.damping = Vec3::Zero();
  const Vec3 f = object_force(ee + m.rest_offset + Vec3(0.0, 0.01, 0.0), ee, Vec3::Zero(), Vec3::Zero(), m);
  CHECK(f.y() == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(f.x() == doctest::Approx(0.0));
  CHECK(f.z() == 0.0);

  m.damping = Vec3::Constant(300.0);
  const Vec3 g = object_force(ee + m.rest_offset, ee, Vec3(0.1, 0, 0), Vec3(0.05, 0, 0), m);
  CHECK(g.x() == doctest::Approx(15.0));
}

TEST_CASE("hand commands are clamped to v_max with the direction kept") {
  CHECK(clamp_command(Vec2(0.3, 0.0), 1.0) == Vec2(0.3, 0.0));
  const Vec2 d = clamp_command(Vec2(1.0, 1.0), 1.0);
  CHECK(d.norm() == doctest::Approx(1.0));
  CHECK(d.x() == doctest::Approx(d.y()));

  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 1000; ++i) {
    const Vec2 v(u(rng), u(rng));
    const Vec2 c = clamp_command(v, 1.0);
    CHECK(c.norm() <= 1.0 + 1e-12);
    CHECK(std::abs(v.x() * c.y() - v.y() * c.x()) <= 1e-12);
    CHECK(v.dot(c) >= 0.0);
  }
  CHECK_THROWS_AS(clamp_command(Vec2(NAN, 0.0), 1.0), std::invalid_argument);
}

TEST_CASE("collision check: clear at start, hit inside an obstacle, touching counts") {
  const auto s = bundled("scenario1");
  const Simulation sim(s);
  const Vec2 hand = sim.state().human.hand;
  const Vec2 ee = sim.state().ee.position.head<2>();
  CHECK(!collision_check(s.robot_start, hand, ee, s));

  const Pose2D inside(4.3, 0.0, M_PI);
  CHECK(collision_check(inside, hand, ee, s) == std::optional<std::string>("obstacle1"));

  // Obstacle sharing the body's rear edge exactly.
  const auto body = robot_outline(s.robot_start, s.robot).vertices();
  Vec2 a = body[0], b = body[0];
  for (const auto& v : body) {
    if (v.x() > a.x() || (v.x() == a.x() && v.y() < a.y())) a = v;
  }
  for (const auto& v : body)
    if (v != a && std::abs(v.x() - a.x()) < 1e-12) b = v;
  REQUIRE(a != b);
  auto touching = s;
  touching.obstacles = {{"touching", Polygon({a, b, b + Vec2(0.5, 0.0), a + Vec2(0.5, 0.0)})}};
  CHECK(collision_check(s.robot_start, hand, ee, touching) == std::optional<std::string>("touching"));
  touching.obstacles = {{"near", Polygon({a + Vec2(1e-6, 0), b + Vec2(1e-6, 0), b + Vec2(0.5, 0.0), a + Vec2(0.5, 0.0)})}};
  CHECK(!collision_check(s.robot_start, hand, ee, touching));

  // The carried box counts too.
  auto box_hit = s;
  box_hit.obstacles = {{"post", Polygon::rectangle(Pose2D(0.5 * (hand + ee), 0.0), 0.1, 0.1)}};
  CHECK(collision_check(s.robot_start, hand, ee, box_hit) == std::optional<std::string>("post"));
}

TEST_CASE("zero command keeps everything still") {
  Simulation sim(bundled("empty_room"));
  const auto q0 = sim.state().joints.q;
  for (int i = 0; i < 500; ++i) sim.step(Vec2::Zero());
  const auto& st = sim.state();
  CHECK((st.joints.q - q0).norm() < 1e-9);
  CHECK(std::isfinite(st.alpha));
  CHECK(st.alpha >= 0.0);
  CHECK(st.alpha <= 1.0);
  CHECK(st.force.norm() < 1e-9);
  CHECK(!st.collision);
  // Walls are more than d_max from the footprint in the empty room.
  CHECK(!st.warning.command.region);
}

TEST_CASE("forward 0.3 m/s with a rigid object: base follows within 10 % after 2 s") {
  Simulation sim(bundled("empty_room"));
  std::vector<double> x, y;
  for (int i = 0; i < 400; ++i) {
    sim.step(Vec2(0.3, 0.0));
    x.push_back(sim.base_pose().position.x());
    y.push_back(sim.base_pose().position.y());
  }
  for (int i = 200; i < 400; i += 10) {
    const double v = (x[i] - x[i - 10]) / 0.1;
    CHECK(std::abs(v - 0.3) <= 0.03);
  }
  // Small lateral offset from the start transient, then straight.
  CHECK(std::abs(y.back()) < 1e-2);
  CHECK(std::abs(y.back() - y[200]) < 1e-4);
  CHECK(sim.state().alpha < 0.2);
}

TEST_CASE("tick bookkeeping and perception sub-rate") {
  Simulation sim(bundled("scenario1"));
  const auto& t = sim.scenario().timing;
  CHECK(sim.state().tick == 0);
  CHECK(sim.state().perceived);
  for (std::uint64_t k = 1; k <= 35; ++k) {
    sim.step(Vec2(0.1, 0.0));
    CHECK(sim.state().tick == k);
    CHECK(sim.state().time == doctest::Approx(static_cast<double>(k) * t.control_dt).epsilon(1e-12));
    CHECK(sim.state().perceived == (k % static_cast<std::uint64_t>(t.perception_divider) == 0));
  }
}

TEST_CASE("reset restores the freshly loaded state") {
  const auto s = bundled("scenario1");
  Simulation fresh(s, 3);
  Simulation sim(s, 3);
  for (int i = 0; i < 250; ++i) sim.step(Vec2(0.3, 0.1));
  CHECK(sim.state().tick == 250);
  sim.reset();
  CHECK(telemetry_frame(sim, 0, true) == telemetry_frame(fresh, 0, true));
  for (int i = 0; i < 30; ++i) {
    sim.step(Vec2(0.2, 0.0));
    fresh.step(Vec2(0.2, 0.0));
  }
  CHECK(telemetry_frame(sim, 0, false) == telemetry_frame(fresh, 0, false));
}

TEST_CASE("sensor noise is a pure function of seed, tick and unit") {
  auto s = bundled("scenario1");
  s.perception.noise_sigma = 0.01;
  Simulation a(s, 11), b(s, 11), c(s, 12);
  for (int i = 0; i < 20; ++i) {
    a.step(Vec2(0.2, 0.0));
    b.step(Vec2(0.2, 0.0));
    c.step(Vec2(0.2, 0.0));
  }
  CHECK(a.state().scans[0].ranges == b.state().scans[0].ranges);
  CHECK(a.state().scans[0].ranges != c.state().scans[0].ranges);
  CHECK(scan_seed(1, 2, 0) != scan_seed(1, 2, 1));
  CHECK(scan_seed(1, 2, 0) != scan_seed(1, 3, 0));
  CHECK(scan_seed(1, 2, 0) == scan_seed(1, 2, 0));
}

TEST_CASE("telemetry frames are self-contained") {
  Simulation sim(bundled("scenario1"));
  for (int i = 0; i < 10; ++i) sim.step(Vec2(0.2, 0.0));
  const auto f = telemetry_frame(sim, 7, false);
  for (const char* key : {"kind", "seq", "tick", "time", "paused", "scenario", "base", "q", "ee", "hand",
                          "hand_velocity", "command", "human", "alpha", "force", "v_adm", "scan", "obstacles",
                          "world", "footprint", "vibration", "warning", "collision", "collided_with", "finished"})
    CHECK_MESSAGE(f.contains(key), key);
  CHECK(f["kind"] == "frame");
  CHECK(f["seq"] == 7);
  CHECK(f["tick"] == 10);
  CHECK(f["q"].size() == wbc::kDof);
  CHECK(f["footprint"]["points"].size() == 12);
  CHECK(!f["scan"].empty());
  CHECK(!f["obstacles"].empty());
  const auto& cmd = sim.state().warning.command;
  const nlohmann::json region =
      cmd.region ? nlohmann::json(std::string(warning::to_string(*cmd.region))) : nlohmann::json(nullptr);
  CHECK(f["vibration"]["region"] == region);
  CHECK(f["vibration"]["intensity"] == cmd.intensity);
  // Round trip through text.
  CHECK(nlohmann::json::parse(f.dump()) == f);
}
