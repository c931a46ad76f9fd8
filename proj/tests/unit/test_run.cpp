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

#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "cotransport/run.hpp"

using namespace cotransport;
using namespace cotransport::sim;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

ScenarioSpec bundled(const std::string& name) {
  return load_scenario_file(std::string(COTRANSPORT_SCENARIO_DIR) + "/" + name + ".json");
}

Script script(const std::string& name) {
  return load_script_file(std::string(COTRANSPORT_SCRIPT_DIR) + "/" + name + ".json");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<json> lines(const fs::path& p) {
  std::vector<json> out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) out.push_back(json::parse(line));
  return out;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("cotransport_test_run_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("script documents") {
  const auto s = load_script(R"({"schema_version": 1, "commands": [{"t": 0, "v": [0.3, 0]}, {"t": 2.5, "v": [0, 0.2]}]})");
  REQUIRE(s.commands.size() == 2);
  CHECK(s.commands[1].t == 2.5);
  CHECK(s.commands[1].v == Vec2(0.0, 0.2));
  CHECK(!s.policy);

  const auto p = load_script(R"({"schema_version": 1, "policy": {"kind": "warning_avoidance", "front_trigger": 0.7}})");
  REQUIRE(p.policy);
  CHECK(p.policy->front_trigger == 0.7);
  CHECK(p.policy->forward_speed == AvoidancePolicy{}.forward_speed);

  auto err = [](const std::string& text) {
    try {
      load_script(text, "s");
    } catch (const ScriptError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(err(R"({"schema_version": 1, "commands": [{"t": 1, "v": [0, 0]}, {"t": 1, "v": [1, 0]}]})")
            .find("/commands/1/t") != std::string::npos);
  CHECK(err(R"({"schema_version": 1, "commands": [{"t": -1, "v": [0, 0]}]})").find("/commands/0/t") !=
        std::string::npos);
  CHECK(err(R"({"schema_version": 1, "commands": [{"t": 0, "v": [0]}]})").find("/commands/0/v") !=
        std::string::npos);
  CHECK(err(R"({"schema_version": 1, "commands": [{"t": 0, "v": [0, 0], "x": 1}]})").find("/commands/0/x") !=
        std::string::npos);
  CHECK(err(R"({"schema_version": 1, "commands": [], "policy": {"kind": "warning_avoidance"}})") != "");
  CHECK(err(R"({"schema_version": 2, "commands": []})").find("/schema_version") != std::string::npos);
  CHECK(err(R"({"schema_version": 1, "policy": {"kind": "other"}})").find("/policy/kind") != std::string::npos);
  CHECK(err("[").find("malformed") != std::string::npos);
}

TEST_CASE("scripted commands are piecewise constant in simulation time") {
  Simulation sim(bundled("empty_room"));
  ScriptedCommands src({{0.5, Vec2(0.3, 0.0)}, {1.0, Vec2(0.0, 0.1)}});
  std::vector<Vec2> seen;
  for (int i = 0; i < 120; ++i) {
    const Vec2 v = src.command(sim);
    seen.push_back(v);
    sim.step(v);
  }
  CHECK(seen[0] == Vec2::Zero());
  CHECK(seen[49] == Vec2::Zero());
  CHECK(seen[50] == Vec2(0.3, 0.0));
  CHECK(seen[99] == Vec2(0.3, 0.0));
  CHECK(seen[100] == Vec2(0.0, 0.1));
}

TEST_CASE("vibration log lines round-trip and say none when idle") {
  VibrationRecord r;
  r.tick = 120;
  r.time = 1.2;
  r.base = Pose2D(2.0, -0.5, M_PI);
  CHECK(vibration_line(r) ==
        R"({"t":1.200,"tick":120,"base":[2.0000,-0.5000],"region":"none","intensity":0.0000,"warned_distance":null,)"
        R"("closest_distance":null,"closest_region":null,"prev_region_distance":null,"no_switch":false})");
  const auto back = parse_vibration_line(vibration_line(r));
  CHECK(!back.region);
  CHECK(back.tick == 120);

  r.region = warning::Region::Front;
  r.intensity = 0.93654;
  r.warned_distance = 0.2576789;
  r.closest_distance = 0.2576789;
  r.closest_region = warning::Region::Front;
  r.previous_region_distance = 0.3227;
  r.switch_suppressed = true;
  const auto line = vibration_line(r);
  CHECK(line.find(R"("region":"front","intensity":0.9365)") != std::string::npos);
  const auto b = parse_vibration_line(line);
  CHECK(b.region == warning::Region::Front);
  CHECK(b.closest_region == warning::Region::Front);
  CHECK(b.warned_distance == doctest::Approx(0.257679));
  CHECK(b.switch_suppressed);
  CHECK(vibration_line(b) == line);
}

TEST_CASE("headless run writes complete logs at the declared rates") {
  auto s = bundled("scenario1");
  s.timing.timeout = 3.0;
  RunOptions o;
  o.out = scratch("rates");
  o.scan_log = true;
  const auto log = run_headless(s, script("straight"), o);
  CHECK(log.outcome == Outcome::Timeout);
  CHECK(log.ticks == 300);

  const auto tel = lines(o.out / "telemetry.jsonl");
  REQUIRE(tel.size() >= 3);
  CHECK(tel.front()["kind"] == "header");
  CHECK(tel.front()["protocol"] == "cotransport-telemetry");
  CHECK(tel.back()["kind"] == "end");
  CHECK(tel.back()["outcome"] == "timeout");
  const std::size_t frames = tel.size() - 2;
  CHECK(tel.back()["frames"] == frames);
  const auto div = static_cast<std::uint64_t>(s.timing.telemetry_divider);
  for (std::size_t i = 1; i <= frames; ++i) {
    CHECK(tel[i]["kind"] == "frame");
    CHECK(tel[i]["seq"] == i - 1);
    CHECK(tel[i]["tick"].get<std::uint64_t>() == (i - 1) * div);
  }

  const auto vib = lines(o.out / "vibration.jsonl");
  const auto pdiv = static_cast<std::uint64_t>(s.timing.perception_divider);
  REQUIRE(vib.size() == log.vibration.size() + 1);
  for (std::size_t i = 0; i + 1 < vib.size(); ++i) CHECK(vib[i]["tick"].get<std::uint64_t>() == i * pdiv);
  CHECK(vib.back()["kind"] == "end");
  CHECK(vib.back()["records"] == log.vibration.size());

  const auto scans = lines(o.out / "scans.jsonl");
  CHECK(scans.size() == 2 * log.vibration.size());

  const auto summary = json::parse(slurp(o.out / "summary.json"));
  CHECK(summary["outcome"] == "timeout");
  CHECK(summary["ticks"] == 300);
  fs::remove_all(o.out);
}

TEST_CASE("same scenario, script and seed give byte-identical logs") {
  auto s = bundled("scenario1");
  s.perception.noise_sigma = 0.01;
  s.timing.timeout = 4.0;
  RunOptions a, b;
  a.seed = b.seed = 42;
  a.out = scratch("det_a");
  b.out = scratch("det_b");
  a.scan_log = b.scan_log = true;
  run_headless(s, script("avoid"), a);
  run_headless(s, script("avoid"), b);
  for (const char* f : {"telemetry.jsonl", "vibration.jsonl", "scans.jsonl", "summary.json"})
    CHECK_MESSAGE(slurp(a.out / f) == slurp(b.out / f), f);

  RunOptions c = a;
  c.seed = 43;
  c.out = scratch("det_c");
  run_headless(s, script("avoid"), c);
  CHECK(slurp(a.out / "scans.jsonl") != slurp(c.out / "scans.jsonl"));
  for (const auto& d : {a.out, b.out, c.out}) fs::remove_all(d);
}

TEST_CASE("straight ahead in scenario 1 hits obstacle 1 before 4.3 m") {
  const auto log = run_headless(bundled("scenario1"), script("straight"), {});
  CHECK(log.outcome == Outcome::Collision);
  CHECK(log.collided_with == std::optional<std::string>("obstacle1"));
  CHECK(log.final_base.position.x() < 4.3);
}

TEST_CASE("unwritable output is reported with its path") {
  const auto file = scratch("blocker");
  std::ofstream(file) << "x";
  RunOptions o;
  o.out = file / "sub";
  auto s = bundled("empty_room");
  s.timing.timeout = 0.1;
  CHECK_THROWS_WITH(run_headless(s, Script{}, o), doctest::Contains(file.string().c_str()));
  fs::remove(file);
}
