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

#include "cotransport/replay.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace cotransport::sim {

using nlohmann::json;

VibrationLog read_vibration_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ReplayError("cannot open " + path.string());
  VibrationLog log;
  std::optional<json> end;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto where = path.string() + ":" + std::to_string(lineno);
    if (end) throw ReplayError(where + ": data after the end record");
    if (in.eof()) throw ReplayError(where + ": last line is not terminated (truncated log)");
    try {
      auto j = json::parse(line);
      if (j.contains("kind")) {
        if (j.at("kind") != "end") throw ReplayError(where + ": unexpected record kind");
        end = std::move(j);
      } else {
        log.records.push_back(parse_vibration_line(line));
      }
    } catch (const ReplayError&) {
      throw;
    } catch (const std::exception& e) {
      throw ReplayError(where + ": " + e.what());
    }
  }
  if (!end) throw ReplayError(path.string() + ": no end record (truncated log)");
  try {
    const auto outcome = outcome_from_string(end->at("outcome").get<std::string>());
    if (!outcome) throw ReplayError(path.string() + ": unknown outcome in end record");
    log.outcome = *outcome;
    log.ticks = end->at("ticks").get<std::uint64_t>();
    log.time = end->at("time").get<double>();
    if (end->at("records").get<std::size_t>() != log.records.size())
      throw ReplayError(path.string() + ": record count disagrees with the end record");
  } catch (const json::exception& e) {
    throw ReplayError(path.string() + ": bad end record: " + e.what());
  }
  return log;
}

std::vector<Episode> region_episodes(const std::vector<VibrationRecord>& records) {
  std::vector<Episode> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (out.empty() || out.back().region != r.region) {
      Episode e;
      e.region = r.region;
      e.t_start = r.time;
      e.base_start = r.base.position;
      e.first = i;
      out.push_back(e);
    }
    auto& e = out.back();
    e.t_end = r.time;
    e.base_end = r.base.position;
    e.last = i;
    e.max_intensity = std::max(e.max_intensity, r.intensity);
  }
  return out;
}

std::vector<Interval> no_switch_intervals(const std::vector<VibrationRecord>& records) {
  std::vector<Interval> out;
  bool open = false;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].switch_suppressed) {
      open = false;
      continue;
    }
    if (!open) out.push_back({records[i].time, records[i].time, i, i});
    open = true;
    out.back().t_end = records[i].time;
    out.back().last = i;
  }
  return out;
}

std::vector<NamedOutline> read_world_outline(const std::filesystem::path& telemetry) {
  std::ifstream in(telemetry, std::ios::binary);
  if (!in) throw ReplayError("cannot open " + telemetry.string());
  std::string line;
  while (std::getline(in, line)) {
    const auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || j.value("kind", "") != "frame") continue;
    std::vector<NamedOutline> out;
    for (const auto& w : j.at("world")) {
      NamedOutline o{w.at("name").get<std::string>(), {}};
      for (const auto& p : w.at("vertices")) o.vertices.emplace_back(p[0].get<double>(), p[1].get<double>());
      out.push_back(std::move(o));
    }
    return out;
  }
  return {};
}

namespace {

std::string_view region_color(const std::optional<warning::Region>& r) {
  if (!r) return "#9e9e9e";
  switch (*r) {
    case warning::Region::Front: return "#d62728";
    case warning::Region::Right: return "#1f77b4";
    case warning::Region::Back: return "#9467bd";
    case warning::Region::Left: return "#2ca02c";
  }
  return "#000000";
}

std::string region_name(const std::optional<warning::Region>& r) {
  return r ? std::string(warning::to_string(*r)) : "none";
}

struct Frame2D {
  double x0, y1, scale, margin;
  double px(double x) const { return margin + (x - x0) * scale; }
  double py(double y) const { return margin + (y1 - y) * scale; }
};

std::string legend(double x, double y) {
  std::string s;
  const std::optional<warning::Region> regions[] = {warning::Region::Front, warning::Region::Right,
                                                    warning::Region::Back, warning::Region::Left,
                                                    std::nullopt};
  for (const auto& r : regions) {
    s += fmt::format(R"(<rect x="{:.1f}" y="{:.1f}" width="14" height="10" fill="{}"/>)"
                     R"(<text x="{:.1f}" y="{:.1f}" font-size="12">{}</text>)"
                     "\n",
                     x, y, region_color(r), x + 18, y + 10, region_name(r));
    x += 80;
  }
  return s;
}

}  // namespace

std::string path_svg(const VibrationLog& log, const std::vector<NamedOutline>& world) {
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
  double x1 = -x0, y1 = -x0;
  auto grow = [&](const Vec2& p) {
    x0 = std::min(x0, p.x());
    y0 = std::min(y0, p.y());
    x1 = std::max(x1, p.x());
    y1 = std::max(y1, p.y());
  };
  for (const auto& o : world)
    for (const auto& v : o.vertices) grow(v);
  for (const auto& r : log.records) grow(r.base.position);
  if (!std::isfinite(x0)) x0 = y0 = 0.0, x1 = y1 = 1.0;
  const double width = 900.0, margin = 30.0;
  const double scale = (width - 2 * margin) / std::max(x1 - x0, 1e-6);
  const double height = (y1 - y0) * scale + 2 * margin + 30.0;
  const Frame2D f{x0, y1, scale, margin};

  std::string s = fmt::format(
      R"(<svg xmlns="http://www.w3.org/2000/svg" width="{:.0f}" height="{:.0f}" viewBox="0 0 {:.0f} {:.0f}">)"
      "\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      width, height, width, height);
  for (const auto& o : world) {
    std::string pts;
    for (const auto& v : o.vertices) pts += fmt::format("{:.1f},{:.1f} ", f.px(v.x()), f.py(v.y()));
    s += fmt::format(R"(<polygon points="{}" fill="#e0e0e0" stroke="#616161" stroke-width="1"><title>{}</title></polygon>)"
                     "\n",
                     pts, o.name);
  }
  for (std::size_t i = 1; i < log.records.size(); ++i) {
    const auto& a = log.records[i - 1];
    const auto& b = log.records[i];
    s += fmt::format(
        R"(<line x1="{:.1f}" y1="{:.1f}" x2="{:.1f}" y2="{:.1f}" stroke="{}" stroke-width="{:.2f}" stroke-linecap="round"/>)"
        "\n",
        f.px(a.base.position.x()), f.py(a.base.position.y()), f.px(b.base.position.x()),
        f.py(b.base.position.y()), region_color(b.region), 1.5 + 8.0 * b.intensity);
  }
  s += legend(margin, height - 22.0);
  s += "</svg>\n";
  return s;
}

std::string timeseries_svg(const VibrationLog& log) {
  const double width = 900.0, left = 60.0, right = 20.0, panel = 150.0, gap = 30.0, top = 20.0;
  const double height = top + 3 * panel + 2 * gap + 70.0;
  const double t_end = std::max(log.records.empty() ? 1.0 : log.records.back().time, 1e-6);
  auto px = [&](double t) { return left + std::min(t, t_end) / t_end * (width - left - right); };
  // Each record holds until the next one.
  auto until = [&](std::size_t last) {
    return last + 1 < log.records.size() ? log.records[last + 1].time : t_end;
  };

  double d_top = 0.0;
  for (const auto& r : log.records)
    for (const auto& d : {r.warned_distance, r.closest_distance, r.previous_region_distance})
      if (d) d_top = std::max(d_top, *d);
  d_top = std::max(d_top, 0.1);

  const double y_int = top, y_reg = top + panel + gap, y_dst = top + 2 * (panel + gap);
  auto py_int = [&](double v) { return y_int + (1.0 - v) * panel; };
  auto py_dst = [&](double v) { return y_dst + (1.0 - v / d_top) * panel; };

  std::string s = fmt::format(
      R"(<svg xmlns="http://www.w3.org/2000/svg" width="{:.0f}" height="{:.0f}" viewBox="0 0 {:.0f} {:.0f}">)"
      "\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      width, height, width, height);

  // No-switch shading across the distance panel.
  for (const auto& iv : no_switch_intervals(log.records)) {
    s += fmt::format(R"(<rect class="no-switch" x="{:.1f}" y="{:.1f}" width="{:.1f}" height="{:.1f}" fill="#ffe082" opacity="0.6"/>)"
                     "\n",
                     px(iv.t_start), y_dst, std::max(px(until(iv.last)) - px(iv.t_start), 1.0), panel);
  }

  for (double y : {y_int, y_reg, y_dst})
    s += fmt::format(R"(<rect x="{:.1f}" y="{:.1f}" width="{:.1f}" height="{:.1f}" fill="none" stroke="#424242"/>)"
                     "\n",
                     left, y, width - left - right, panel);
  s += fmt::format(R"(<text x="5" y="{:.1f}" font-size="12">intensity</text>)"
                   R"(<text x="5" y="{:.1f}" font-size="12">region</text>)"
                   R"(<text x="5" y="{:.1f}" font-size="12">distance</text>)"
                   R"(<text x="5" y="{:.1f}" font-size="10">{:.2f} m</text>)"
                   R"(<text x="5" y="{:.1f}" font-size="10">1.0</text>)"
                   "\n",
                   y_int + 12, y_reg + 12, y_dst + 12, y_dst + 24, d_top, y_int + 24);

  auto polyline = [&](auto value, auto py, std::string_view color, std::string_view dash) {
    std::string out, pts;
    auto flush = [&] {
      if (!pts.empty())
        out += fmt::format(R"(<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5" stroke-dasharray="{}"/>)"
                           "\n",
                           pts, color, dash);
      pts.clear();
    };
    for (const auto& r : log.records) {
      const std::optional<double> v = value(r);
      if (!v) {
        flush();
        continue;
      }
      pts += fmt::format("{:.1f},{:.1f} ", px(r.time), py(*v));
    }
    flush();
    return out;
  };

  s += polyline([](const VibrationRecord& r) { return std::optional<double>(r.intensity); }, py_int,
                "#212121", "none");
  for (const auto& e : region_episodes(log.records)) {
    s += fmt::format(R"(<rect x="{:.1f}" y="{:.1f}" width="{:.1f}" height="{:.1f}" fill="{}"><title>{}</title></rect>)"
                     "\n",
                     px(e.t_start), y_reg + 10, std::max(px(until(e.last)) - px(e.t_start), 1.0), panel - 20,
                     region_color(e.region), region_name(e.region));
  }
  s += polyline([](const VibrationRecord& r) { return r.warned_distance; }, py_dst, "#d62728", "none");
  s += polyline([](const VibrationRecord& r) { return r.closest_distance; }, py_dst, "#1f77b4", "5,3");

  const double y_axis = y_dst + panel + 16;
  for (int k = 0; k <= 10; ++k) {
    const double t = t_end * k / 10.0;
    s += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" font-size="10" text-anchor="middle">{:.1f}</text>)"
                     "\n",
                     px(t), y_axis, t);
  }
  s += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" font-size="12">time [s]; red: warned distance, blue dashed: closest distance, yellow: switch held back</text>)"
                   "\n",
                   left, y_axis + 18);
  s += legend(left, height - 16.0);
  s += "</svg>\n";
  return s;
}

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f << text;
  f.flush();
  if (!f) throw std::runtime_error("write failed for " + p.string());
}

json vec(const Vec2& v) { return json::array({v.x(), v.y()}); }

}  // namespace

ReplayOutputs replay(const std::filesystem::path& log_path, const std::filesystem::path& out) {
  const auto log = read_vibration_log(log_path);
  std::vector<NamedOutline> world;
  const auto telemetry = log_path.parent_path() / "telemetry.jsonl";
  if (std::filesystem::exists(telemetry)) world = read_world_outline(telemetry);

  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw std::runtime_error("cannot create " + out.string() + ": " + ec.message());
  ReplayOutputs o{out / "path.svg", out / "timeseries.svg", out / "episodes.json"};
  write_file(o.path_plot, path_svg(log, world));
  write_file(o.timeseries_plot, timeseries_svg(log));

  json episodes = json::array();
  for (const auto& e : region_episodes(log.records))
    episodes.push_back({{"region", region_name(e.region)},
                        {"t_start", e.t_start},
                        {"t_end", e.t_end},
                        {"max_intensity", e.max_intensity},
                        {"base_start", vec(e.base_start)},
                        {"base_end", vec(e.base_end)}});
  json holds = json::array();
  for (const auto& iv : no_switch_intervals(log.records))
    holds.push_back({{"t_start", iv.t_start}, {"t_end", iv.t_end}});
  write_file(o.episodes, json{{"outcome", std::string(to_string(log.outcome))},
                              {"records", log.records.size()},
                              {"episodes", std::move(episodes)},
                              {"no_switch_intervals", std::move(holds)}}
                             .dump(2) +
                             "\n");
  return o;
}

}  // namespace cotransport::sim
