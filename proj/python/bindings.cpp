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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>
#include <nlohmann/json.hpp>

#include "cotransport/perception.hpp"
#include "cotransport/replay.hpp"
#include "cotransport/session.hpp"

namespace py = pybind11;
using namespace cotransport;
using namespace cotransport::sim;

namespace {

using XY = std::pair<double, double>;

std::vector<XY> as_pairs(const std::vector<Vec2>& v) {
  std::vector<XY> out;
  out.reserve(v.size());
  for (const auto& p : v) out.emplace_back(p.x(), p.y());
  return out;
}

std::vector<Vec2> as_points(const std::vector<XY>& v) {
  std::vector<Vec2> out;
  out.reserve(v.size());
  for (const auto& [x, y] : v) out.emplace_back(x, y);
  return out;
}

std::optional<warning::Region> region_arg(const std::optional<std::string>& name) {
  if (!name) return std::nullopt;
  const auto r = warning::region_from_string(*name);
  if (!r) throw py::value_error("unknown region: " + *name);
  return r;
}

py::dict run_summary(const RunLog& log) {
  py::dict d;
  d["outcome"] = std::string(to_string(log.outcome));
  d["ticks"] = log.ticks;
  d["time"] = log.time;
  d["final_base"] = py::make_tuple(log.final_base.position.x(), log.final_base.position.y(), log.final_base.heading);
  d["collided_with"] = log.collided_with;
  d["mean_alpha"] = log.mean_alpha;
  d["vibration_records"] = log.vibration.size();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Co-transport simulator core";

  py::register_exception<ScenarioError>(m, "ScenarioError", PyExc_ValueError);
  py::register_exception<ScriptError>(m, "ScriptError", PyExc_ValueError);
  py::register_exception<ReplayError>(m, "ReplayError", PyExc_ValueError);

  m.attr("PROTOCOL_NAME") = std::string(kProtocolName);
  m.attr("PROTOCOL_VERSION") = kProtocolVersion;

  m.def("validate_scenario", [](const std::filesystem::path& p) { return load_scenario_file(p).name; },
        py::arg("path"), "Loads a scenario file and returns its name; raises ScenarioError.");

  m.def(
      "compute_intensity",
      [](double d, double d_crit, double d_max) {
        warning::WarningParams p;
        p.d_crit = d_crit;
        p.d_max = d_max;
        p.validate();
        return warning::compute_intensity(d, p);
      },
      py::arg("distance"), py::arg("d_crit") = 0.2, py::arg("d_max") = 1.1);

  m.def(
      "select_warning",
      [](const std::vector<std::pair<double, std::string>>& obstacles, const std::optional<std::string>& previous,
         double d_max, double switch_ratio) {
        std::vector<warning::RankedObstacle> ranked;
        for (std::size_t i = 0; i < obstacles.size(); ++i) {
          warning::RankedObstacle o;
          o.index = i;
          o.distance = obstacles[i].first;
          o.region = *region_arg(obstacles[i].second);
          ranked.push_back(o);
        }
        warning::WarningParams p;
        p.d_max = d_max;
        p.switch_ratio = switch_ratio;
        const auto sel = warning::select_warning(ranked, region_arg(previous), p);
        std::optional<std::string> region;
        if (sel.region) region = std::string(warning::to_string(*sel.region));
        std::optional<std::size_t> index;
        if (sel.warned) index = sel.warned->index;
        return py::make_tuple(region, index);
      },
      py::arg("obstacles"), py::arg("previous") = py::none(), py::arg("d_max") = 1.1, py::arg("switch_ratio") = 0.8,
      "obstacles: [(distance, region)]. Returns (region or None, warned index or None).");

  m.def(
      "concave_hull",
      [](const std::vector<XY>& points) {
        return as_pairs(perception::extract_polygon(as_points(points)).polygon.vertices());
      },
      py::arg("points"));
  m.def(
      "convex_hull", [](const std::vector<XY>& points) { return as_pairs(perception::convex_hull(as_points(points))); },
      py::arg("points"));

  py::class_<Simulation>(m, "Simulation")
      .def(py::init([](const std::filesystem::path& scenario, std::uint64_t seed) {
             return Simulation(load_scenario_file(scenario), seed);
           }),
           py::arg("scenario"), py::arg("seed") = 0)
      .def("step", [](Simulation& s, double vx, double vy) { s.step(Vec2(vx, vy)); }, py::arg("vx"), py::arg("vy"))
      .def("reset", &Simulation::reset)
      .def("frame_json", [](const Simulation& s) { return telemetry_frame(s, 0, false).dump(); })
      .def_property_readonly("tick", [](const Simulation& s) { return s.state().tick; })
      .def_property_readonly("time", [](const Simulation& s) { return s.state().time; })
      .def_property_readonly("alpha", [](const Simulation& s) { return s.state().alpha; })
      .def_property_readonly("finished", &Simulation::finished)
      .def_property_readonly("collision", [](const Simulation& s) { return s.state().collision; })
      .def_property_readonly("base", [](const Simulation& s) {
        const auto b = s.base_pose();
        return py::make_tuple(b.position.x(), b.position.y(), b.heading);
      });

  m.def(
      "run_headless",
      [](const std::filesystem::path& scenario, const std::filesystem::path& script, const std::filesystem::path& out,
         std::uint64_t seed, bool scan_log) {
        const auto spec = load_scenario_file(scenario);
        const auto scr = load_script_file(script);
        RunOptions o;
        o.out = out;
        o.seed = seed;
        o.scan_log = scan_log;
        RunLog log;
        {
          py::gil_scoped_release release;
          log = run_headless(spec, scr, o);
        }
        return run_summary(log);
      },
      py::arg("scenario"), py::arg("script"), py::arg("out") = std::filesystem::path(), py::arg("seed") = 0,
      py::arg("scan_log") = false);

  m.def(
      "replay",
      [](const std::filesystem::path& log, const std::filesystem::path& out) {
        const auto r = replay(log, out);
        py::dict d;
        d["path_plot"] = r.path_plot;
        d["timeseries_plot"] = r.timeseries_plot;
        d["episodes"] = r.episodes;
        return d;
      },
      py::arg("log"), py::arg("out"));

  py::class_<SessionCore>(m, "SessionCore")
      .def(py::init([](const std::filesystem::path& scenario, std::uint64_t seed, double realtime) {
             SessionOptions o;
             o.seed = seed;
             o.realtime = realtime;
             o.scenario_dir = scenario.parent_path();
             return SessionCore(load_scenario_file(scenario), o);
           }),
           py::arg("scenario"), py::arg("seed") = 0, py::arg("realtime") = 1.0)
      .def("connect", &SessionCore::connect)
      .def("disconnect", &SessionCore::disconnect)
      .def("receive", [](SessionCore& s, const std::string& text) { return s.receive(text); }, py::arg("text"))
      .def("period", &SessionCore::period)
      .def_property_readonly("paused", &SessionCore::paused)
      .def_property_readonly("handshaken", &SessionCore::handshaken);
}
