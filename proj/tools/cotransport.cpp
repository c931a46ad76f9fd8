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

#include <csignal>
#include <cstdio>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "cotransport/replay.hpp"
#include "cotransport/run.hpp"
#include "cotransport/scenario.hpp"
#include "cotransport/session.hpp"

namespace cs = cotransport::sim;

namespace {

int simulate(const std::string& scenario_path, const std::string& script_path, std::uint64_t seed,
             const std::string& out, double realtime, bool scan_log) {
  const auto scenario = cs::load_scenario_file(scenario_path);
  const auto script = script_path.empty() ? cs::Script{} : cs::load_script_file(script_path);
  cs::RunOptions options;
  options.seed = seed;
  options.out = out;
  options.realtime = realtime;
  options.scan_log = scan_log;
  const auto log = cs::run_headless(scenario, script, options);
  fmt::print("{}: {} at t={:.2f} s, base=({:.3f}, {:.3f}), mean alpha={:.3f}", scenario.name,
             cs::to_string(log.outcome), log.time, log.final_base.position.x(), log.final_base.position.y(),
             log.mean_alpha);
  if (log.collided_with) fmt::print(", hit {}", *log.collided_with);
  fmt::print("\n");
  if (!out.empty()) fmt::print("logs in {}\n", out);
  return 0;
}

int serve(const std::string& scenario_path, unsigned short port, const std::string& address,
          double realtime, std::uint64_t seed) {
  auto scenario = cs::load_scenario_file(scenario_path);
  cs::ServeOptions options;
  options.address = address;
  options.port = port;
  options.session.seed = seed;
  options.session.realtime = realtime;
  options.session.scenario_dir = std::filesystem::path(scenario_path).parent_path();
  if (options.session.scenario_dir.empty()) options.session.scenario_dir = ".";
  options.on_listening = [&](unsigned short p) {
    fmt::print("serving {} on ws://{}:{}\n", scenario.name, address, p);
    std::fflush(stdout);
  };

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  std::exception_ptr failure;
  std::jthread server([&](std::stop_token stop) {
    try {
      cs::serve_session(scenario, options, stop);
    } catch (...) {
      failure = std::current_exception();
      std::raise(SIGTERM);
    }
  });
  int sig = 0;
  sigwait(&signals, &sig);
  server.request_stop();
  server.join();
  if (failure) std::rethrow_exception(failure);
  return 0;
}

int validate(const std::string& scenario_path) {
  const auto s = cs::load_scenario_file(scenario_path);
  fmt::print("{}: ok ({} walls, {} obstacles, finish at x={:.2f})\n", s.name, s.walls.size(),
             s.obstacles.size(), s.finish_x());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Human-robot co-transport simulator"};
  app.require_subcommand(1);

  std::string scenario, script, out, log;
  std::uint64_t seed = 0;
  double realtime = 0.0;
  bool scan_log = false;
  auto* sim = app.add_subcommand("simulate", "Run a scripted episode headless and write logs");
  sim->add_option("--scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  sim->add_option("--script", script, "Command script (default: stand still)")->check(CLI::ExistingFile);
  sim->add_option("--seed", seed, "Sensor noise seed");
  sim->add_option("--out", out, "Output directory for logs");
  sim->add_option("--realtime", realtime, "Pace at this multiple of wall time (0: as fast as possible)")
      ->check(CLI::NonNegativeNumber);
  sim->add_flag("--scan-log", scan_log, "Also write scans.jsonl");

  unsigned short port = 8765;
  std::string address = "127.0.0.1";
  double serve_realtime = 1.0;
  auto* srv = app.add_subcommand("serve", "Serve a live session over WebSocket");
  srv->add_option("--scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  srv->add_option("--port", port, "TCP port (0: any free port)");
  srv->add_option("--address", address, "Bind address");
  srv->add_option("--realtime", serve_realtime, "Simulated seconds per wall second")->check(CLI::PositiveNumber);
  srv->add_option("--seed", seed, "Sensor noise seed");

  auto* rep = app.add_subcommand("replay", "Render plots and episodes from a vibration log");
  rep->add_option("--log", log, "vibration.jsonl")->required()->check(CLI::ExistingFile);
  rep->add_option("--out", out, "Output directory")->required();

  auto* val = app.add_subcommand("validate", "Check a scenario file");
  val->add_option("--scenario", scenario, "Scenario file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return simulate(scenario, script, seed, out, realtime, scan_log);
    if (*srv) return serve(scenario, port, address, serve_realtime, seed);
    if (*rep) {
      const auto o = cs::replay(log, out);
      fmt::print("wrote {}, {}, {}\n", o.path_plot.string(), o.timeseries_plot.string(), o.episodes.string());
      return 0;
    }
    if (*val) return validate(scenario);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
