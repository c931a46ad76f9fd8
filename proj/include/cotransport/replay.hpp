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

#include "cotransport/run.hpp"

namespace cotransport::sim {

class ReplayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct VibrationLog {
  std::vector<VibrationRecord> records;
  Outcome outcome{Outcome::Timeout};
  std::uint64_t ticks{0};
  double time{0.0};
};

/// Reads vibration.jsonl. Rejects logs that lack the end record, whose
/// record count disagrees with it, or that contain unparsable lines.
VibrationLog read_vibration_log(const std::filesystem::path& path);

/// Maximal run of consecutive records with the same output region.
struct Episode {
  std::optional<warning::Region> region;
  double t_start{0.0};
  double t_end{0.0};
  double max_intensity{0.0};
  Vec2 base_start{Vec2::Zero()};
  Vec2 base_end{Vec2::Zero()};
  std::size_t first{0};
  std::size_t last{0};
};

std::vector<Episode> region_episodes(const std::vector<VibrationRecord>& records);

/// Maximal runs of records where the switch to a closer obstacle was held back.
struct Interval {
  double t_start{0.0};
  double t_end{0.0};
  std::size_t first{0};
  std::size_t last{0};
};

std::vector<Interval> no_switch_intervals(const std::vector<VibrationRecord>& records);

/// Ground-truth polygons to draw under the path, taken from a telemetry frame.
struct NamedOutline {
  std::string name;
  std::vector<Vec2> vertices;
};

/// Reads the `world` array of the first frame in telemetry.jsonl.
std::vector<NamedOutline> read_world_outline(const std::filesystem::path& telemetry);

/// Top-down base path, colored by warned region, stroke width growing with intensity.
std::string path_svg(const VibrationLog& log, const std::vector<NamedOutline>& world);

/// Intensity, region and distances over time; no-switch intervals shaded.
std::string timeseries_svg(const VibrationLog& log);

struct ReplayOutputs {
  std::filesystem::path path_plot;
  std::filesystem::path timeseries_plot;
  std::filesystem::path episodes;
};

/// `log` is a vibration.jsonl. A telemetry.jsonl next to it, when present,
/// supplies the room and obstacle outlines for the path plot.
ReplayOutputs replay(const std::filesystem::path& log, const std::filesystem::path& out);

}  // namespace cotransport::sim
