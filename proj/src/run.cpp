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

#include "cotransport/run.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace cotransport::sim {

using nlohmann::json;

namespace {

[[noreturn]] void script_fail(const std::string& origin, const std::string& pointer, const std::string& msg) {
  throw ScriptError(origin + ": " + pointer + ": " + msg);
}

double number_at(const json& j, const std::string& key, const std::string& origin, const std::string& ptr) {
  if (!j.contains(key)) script_fail(origin, ptr, "missing required key \"" + key + "\"");
  const auto& v = j.at(key);
  if (!v.is_number() || !std::isfinite(v.get<double>())) script_fail(origin, ptr + "/" + key, "expected a finite number");
  return v.get<double>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& origin,
                    const std::string& ptr) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) script_fail(origin, ptr + "/" + it.key(), "unknown key");
  }
}

}  // namespace

Script load_script(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScriptError(origin + ": malformed document: " + e.what());
  }
  if (!doc.is_object()) script_fail(origin, "/", "expected an object");
  reject_unknown(doc, {"schema_version", "commands", "policy"}, origin, "");
  if (number_at(doc, "schema_version", origin, "") != 1.0)
    script_fail(origin, "/schema_version", "unsupported schema version (expected 1)");
  if (doc.contains("commands") == doc.contains("policy"))
    script_fail(origin, "/", "give exactly one of \"commands\" or \"policy\"");

  Script s;
  if (doc.contains("commands")) {
    const auto& cmds = doc.at("commands");
    if (!cmds.is_array()) script_fail(origin, "/commands", "expected an array");
    for (std::size_t i = 0; i < cmds.size(); ++i) {
      const std::string ptr = "/commands/" + std::to_string(i);
      const auto& c = cmds[i];
      if (!c.is_object()) script_fail(origin, ptr, "expected an object");
      reject_unknown(c, {"t", "v"}, origin, ptr);
      TimedCommand tc;
      tc.t = number_at(c, "t", origin, ptr);
      if (!c.contains("v") || !c.at("v").is_array() || c.at("v").size() != 2 ||
          !c.at("v")[0].is_number() || !c.at("v")[1].is_number())
        script_fail(origin, ptr + "/v", "expected [vx, vy]");
      tc.v = Vec2(c.at("v")[0].get<double>(), c.at("v")[1].get<double>());
      if (!tc.v.allFinite()) script_fail(origin, ptr + "/v", "expected finite numbers");
      if (!s.commands.empty() && !(tc.t > s.commands.back().t))
        script_fail(origin, ptr + "/t", "timestamps must be strictly increasing");
      if (tc.t < 0.0) script_fail(origin, ptr + "/t", "timestamps must be >= 0");
      s.commands.push_back(tc);
    }
  } else {
    const auto& p = doc.at("policy");
    if (!p.is_object()) script_fail(origin, "/policy", "expected an object");
    reject_unknown(p, {"kind", "forward_speed", "lateral_speed", "front_trigger", "detour_distance"},
                   origin, "/policy");
    if (!p.contains("kind") || p.at("kind") != "warning_avoidance")
      script_fail(origin, "/policy/kind", "expected \"warning_avoidance\"");
    AvoidancePolicy a;
    auto opt = [&](const char* key, double& dst) {
      if (p.contains(key)) {
        dst = number_at(p, key, origin, "/policy");
        if (!(dst > 0.0)) script_fail(origin, std::string("/policy/") + key, "expected a positive number");
      }
    };
    opt("forward_speed", a.forward_speed);
    opt("lateral_speed", a.lateral_speed);
    opt("front_trigger", a.front_trigger);
    opt("detour_distance", a.detour_distance);
    s.policy = a;
  }
  return s;
}

Script load_script_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScriptError(path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_script(ss.str(), path.string());
}

ScriptedCommands::ScriptedCommands(std::vector<TimedCommand> commands) : commands_(std::move(commands)) {}

Vec2 ScriptedCommands::command(const Simulation& sim) {
  // The command for the coming tick is the last one issued at or before now.
  const double now = sim.state().time + 1e-9;
  Vec2 v = Vec2::Zero();
  for (const auto& c : commands_) {
    if (c.t > now) break;
    v = c.v;
  }
  return v;
}

Vec2 AvoidanceDriver::command(const Simulation& sim) {
  const double h = sim.scenario().operator_start.heading;
  const Vec2 forward(std::cos(h), std::sin(h));
  const Vec2 left(-forward.y(), forward.x());
  const auto& cmd = sim.state().warning.command;
  const double lateral = sim.state().human.hand.dot(left);

  if (sidestepping_) {
    if (std::abs(lateral - start_lateral_) >= policy_.detour_distance) {
      sidestepping_ = false;
    } else {
      return side_sign_ * policy_.lateral_speed * left;
    }
  }
  if (cmd.region && cmd.intensity > 0.0 &&
      (*cmd.region == warning::Region::Left || *cmd.region == warning::Region::Right))
    last_side_ = cmd.region;
  if (cmd.region == warning::Region::Front && cmd.intensity >= policy_.front_trigger) {
    sidestepping_ = true;
    side_sign_ = last_side_ == warning::Region::Left ? -1.0 : 1.0;
    start_lateral_ = lateral;
    return side_sign_ * policy_.lateral_speed * left;
  }
  return policy_.forward_speed * forward;
}

std::unique_ptr<CommandSource> make_command_source(const Script& script) {
  if (script.policy) return std::make_unique<AvoidanceDriver>(*script.policy);
  return std::make_unique<ScriptedCommands>(script.commands);
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Finished: return "finished";
    case Outcome::Collision: return "collision";
    case Outcome::Timeout: return "timeout";
  }
  return "?";
}

std::optional<Outcome> outcome_from_string(std::string_view s) {
  for (auto o : {Outcome::Finished, Outcome::Collision, Outcome::Timeout})
    if (to_string(o) == s) return o;
  return std::nullopt;
}

namespace {

std::string opt_fixed(const std::optional<double>& v) {
  return v ? fmt::format("{:.6f}", *v) : std::string("null");
}

std::string opt_region(const std::optional<warning::Region>& r) {
  return r ? fmt::format("\"{}\"", warning::to_string(*r)) : std::string("null");
}

std::optional<double> opt_number(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

std::optional<warning::Region> opt_region(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  auto r = warning::region_from_string(v.get<std::string>());
  if (!r) throw std::runtime_error(std::string("unknown region in ") + key);
  return r;
}

VibrationRecord record_of(const Simulation& sim) {
  const auto& s = sim.state();
  const auto& sel = s.warning.selection;
  VibrationRecord r;
  r.tick = s.tick;
  r.time = s.time;
  r.base = sim.base_pose();
  r.region = s.warning.command.region;
  r.intensity = s.warning.command.intensity;
  if (sel.warned) r.warned_distance = sel.warned->distance;
  if (sel.closest) {
    r.closest_distance = sel.closest->distance;
    r.closest_region = sel.closest->region;
  }
  if (sel.previous_region_closest) r.previous_region_distance = sel.previous_region_closest->distance;
  r.switch_suppressed = sel.switch_suppressed;
  return r;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + p.string() + " for writing");
  return f;
}

void check_written(std::ofstream& f, const std::filesystem::path& p) {
  f.flush();
  if (!f) throw std::runtime_error("write failed for " + p.string());
}

}  // namespace

std::string vibration_line(const VibrationRecord& r) {
  return fmt::format(
      "{{\"t\":{:.3f},\"tick\":{},\"base\":[{:.4f},{:.4f}],\"region\":{},\"intensity\":{:.4f},"
      "\"warned_distance\":{},\"closest_distance\":{},\"closest_region\":{},"
      "\"prev_region_distance\":{},\"no_switch\":{}}}",
      r.time, r.tick, r.base.position.x(), r.base.position.y(),
      r.region ? opt_region(r.region) : std::string("\"none\""), r.intensity,
      opt_fixed(r.warned_distance), opt_fixed(r.closest_distance), opt_region(r.closest_region),
      opt_fixed(r.previous_region_distance), r.switch_suppressed ? "true" : "false");
}

VibrationRecord parse_vibration_line(const std::string& line) {
  const auto j = json::parse(line);
  VibrationRecord r;
  r.time = j.at("t").get<double>();
  r.tick = j.at("tick").get<std::uint64_t>();
  r.base = Pose2D(j.at("base")[0].get<double>(), j.at("base")[1].get<double>(), 0.0);
  if (j.at("region") != "none") r.region = opt_region(j, "region");
  r.intensity = j.at("intensity").get<double>();
  r.warned_distance = opt_number(j, "warned_distance");
  r.closest_distance = opt_number(j, "closest_distance");
  r.closest_region = opt_region(j, "closest_region");
  r.previous_region_distance = opt_number(j, "prev_region_distance");
  r.switch_suppressed = j.at("no_switch").get<bool>();
  return r;
}

RunLog run_headless(const ScenarioSpec& scenario, const Script& script, const RunOptions& options) {
  Simulation sim(scenario, options.seed);
  auto source = make_command_source(script);
  const bool write = !options.out.empty();
  const auto tel_path = options.out / "telemetry.jsonl";
  const auto vib_path = options.out / "vibration.jsonl";
  const auto scan_path = options.out / "scans.jsonl";
  const auto sum_path = options.out / "summary.json";

  std::ofstream tel, vib, scans;
  if (write) {
    std::error_code ec;
    std::filesystem::create_directories(options.out, ec);
    if (ec) throw std::runtime_error("cannot create " + options.out.string() + ": " + ec.message());
    tel = open_out(tel_path);
    vib = open_out(vib_path);
    if (options.scan_log) scans = open_out(scan_path);
    tel << json{{"kind", "header"},
                {"protocol", "cotransport-telemetry"},
                {"version", 1},
                {"scenario", scenario.name},
                {"seed", options.seed},
                {"control_dt", scenario.timing.control_dt},
                {"finish_x", scenario.finish_x()}}
               .dump()
        << '\n';
  }

  RunLog log;
  std::uint64_t seq = 0;
  auto emit_perception = [&] {
    log.vibration.push_back(record_of(sim));
    if (write) {
      vib << vibration_line(log.vibration.back()) << '\n';
      if (options.scan_log) perception::write_scan_log(scans, sim.state().scans);
    }
  };
  auto emit_frame = [&] {
    if (write) tel << telemetry_frame(sim, seq, false).dump() << '\n';
    ++seq;
  };
  emit_perception();
  emit_frame();

  const auto wall_start = std::chrono::steady_clock::now();
  const auto tel_div = static_cast<std::uint64_t>(scenario.timing.telemetry_divider);
  double alpha_sum = 0.0;
  while (true) {
    const auto& st = sim.state();
    if (st.collision) {
      log.outcome = Outcome::Collision;
      break;
    }
    if (sim.finished()) {
      log.outcome = Outcome::Finished;
      break;
    }
    if (st.time >= scenario.timing.timeout - 1e-9) {
      log.outcome = Outcome::Timeout;
      break;
    }
    sim.step(source->command(sim));
    alpha_sum += sim.state().alpha;
    if (sim.state().perceived) emit_perception();
    if (sim.state().tick % tel_div == 0) emit_frame();
    if (options.realtime > 0.0) {
      const auto due = wall_start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                        std::chrono::duration<double>(sim.state().time / options.realtime));
      std::this_thread::sleep_until(due);
    }
  }

  const auto& st = sim.state();
  log.ticks = st.tick;
  log.time = st.time;
  log.final_base = sim.base_pose();
  log.collided_with = st.collided_with;
  log.mean_alpha = st.tick > 0 ? alpha_sum / static_cast<double>(st.tick) : st.alpha;

  if (write) {
    const json end{{"kind", "end"},
                   {"outcome", std::string(to_string(log.outcome))},
                   {"ticks", log.ticks},
                   {"time", log.time},
                   {"frames", seq},
                   {"base", {log.final_base.position.x(), log.final_base.position.y(), log.final_base.heading}},
                   {"collided_with", log.collided_with ? json(*log.collided_with) : json(nullptr)}};
    tel << end.dump() << '\n';
    vib << json{{"kind", "end"},
                {"outcome", std::string(to_string(log.outcome))},
                {"records", log.vibration.size()},
                {"ticks", log.ticks},
                {"time", log.time}}
               .dump()
        << '\n';
    check_written(tel, tel_path);
    check_written(vib, vib_path);
    if (options.scan_log) check_written(scans, scan_path);

    auto sum = open_out(sum_path);
    sum << json{{"scenario", scenario.name},
                {"seed", options.seed},
                {"outcome", std::string(to_string(log.outcome))},
                {"ticks", log.ticks},
                {"time", log.time},
                {"finish_x", scenario.finish_x()},
                {"final_base", {log.final_base.position.x(), log.final_base.position.y(), log.final_base.heading}},
                {"collided_with", log.collided_with ? json(*log.collided_with) : json(nullptr)},
                {"mean_alpha", log.mean_alpha}}
               .dump(2)
        << '\n';
    check_written(sum, sum_path);
  }
  return log;
}

}  // namespace cotransport::sim
