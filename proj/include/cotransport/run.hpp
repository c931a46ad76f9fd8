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
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cotransport/scenario.hpp"
#include "cotransport/world.hpp"

namespace cotransport::sim {

class ScriptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Hand velocity command active from time `t` until the next entry.
struct TimedCommand {
  double t{0.0};
  Vec2 v{Vec2::Zero()};
};

/// Walks forward, sidesteps away from the last side warning when the front
/// sector vibrates hard, then walks forward again.
struct AvoidancePolicy {
  double forward_speed{0.3};
  double lateral_speed{0.3};
  /// Front intensity that triggers a sidestep.
  double front_trigger{0.6};
  /// Lateral distance covered by one sidestep.
  double detour_distance{1.0};
};

struct Script {
  std::vector<TimedCommand> commands;
  std::optional<AvoidancePolicy> policy;
};

Script load_script(const std::string& text, const std::string& origin = "<script>");
Script load_script_file(const std::filesystem::path& path);

/// Produces one hand command per control tick.
class CommandSource {
 public:
  virtual ~CommandSource() = default;
  virtual Vec2 command(const Simulation& sim) = 0;
};

class ScriptedCommands : public CommandSource {
 public:
  explicit ScriptedCommands(std::vector<TimedCommand> commands);
  Vec2 command(const Simulation& sim) override;

 private:
  std::vector<TimedCommand> commands_;
};

class AvoidanceDriver : public CommandSource {
 public:
  explicit AvoidanceDriver(const AvoidancePolicy& policy) : policy_(policy) {}
  Vec2 command(const Simulation& sim) override;

 private:
  AvoidancePolicy policy_;
  bool sidestepping_{false};
  double side_sign_{1.0};  // +1 steps to the operator's left
  double start_lateral_{0.0};
  std::optional<warning::Region> last_side_;
};

std::unique_ptr<CommandSource> make_command_source(const Script& script);

struct RunOptions {
  std::uint64_t seed{0};
  /// Output directory; nothing is written when empty.
  std::filesystem::path out;
  /// Wall-clock pacing; 0 runs as fast as possible.
  double realtime{0.0};
  bool scan_log{false};
};

enum class Outcome { Finished, Collision, Timeout };
std::string_view to_string(Outcome o);
std::optional<Outcome> outcome_from_string(std::string_view s);

/// One line of the vibration log, written at the perception rate.
struct VibrationRecord {
  std::uint64_t tick{0};
  double time{0.0};
  Pose2D base;
  std::optional<warning::Region> region;
  double intensity{0.0};
  std::optional<double> warned_distance;
  std::optional<double> closest_distance;
  std::optional<warning::Region> closest_region;
  std::optional<double> previous_region_distance;
  bool switch_suppressed{false};
};

struct RunLog {
  Outcome outcome{Outcome::Timeout};
  std::uint64_t ticks{0};
  double time{0.0};
  Pose2D final_base;
  std::optional<std::string> collided_with;
  double mean_alpha{0.0};
  std::vector<VibrationRecord> vibration;
};

/// Runs until the finish line, a collision, or the scenario timeout. Writes
/// telemetry.jsonl, vibration.jsonl and summary.json (plus scans.jsonl when
/// asked) into `options.out`. Both .jsonl logs close with a {"kind":"end"}
/// record; a log without one was cut short.
RunLog run_headless(const ScenarioSpec& scenario, const Script& script, const RunOptions& options);

/// Canonical text of one vibration log line (no trailing newline).
std::string vibration_line(const VibrationRecord& r);
VibrationRecord parse_vibration_line(const std::string& line);

}  // namespace cotransport::sim
