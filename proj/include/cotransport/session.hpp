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
#include <functional>
#include <optional>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cotransport/scenario.hpp"
#include "cotransport/world.hpp"

namespace cotransport::sim {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::string_view kProtocolName = "cotransport-telemetry";

/// A client message that was rejected. `code` is one of malformed,
/// unknown_kind, invalid, handshake_required, version_mismatch,
/// select_failed.
class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

struct HelloMessage {
  std::string protocol;
  int version{0};
};

struct CommandMessage {
  Vec2 v{Vec2::Zero()};
};

enum class ControlAction { Start, Pause, Reset, Select };
std::string_view to_string(ControlAction a);

struct ControlMessage {
  ControlAction action{ControlAction::Pause};
  /// Only for Select.
  std::string scenario;
};

using ClientMessage = std::variant<HelloMessage, CommandMessage, ControlMessage>;

/// Parses one client message. Throws ProtocolError.
ClientMessage parse_client_message(std::string_view text);

struct SessionOptions {
  std::uint64_t seed{0};
  /// Simulated seconds per wall second.
  double realtime{1.0};
  /// Directory searched by `select`; empty disables selection.
  std::filesystem::path scenario_dir;
};

/// Simulation owner of a live session, free of any transport. Each call
/// returns the serialized messages to send back, in order.
///
/// A session starts paused. A client must complete the hello exchange
/// before anything else is accepted. Commands are held until replaced.
/// Disconnecting pauses, zeroes the command and requires a new hello.
class SessionCore {
 public:
  SessionCore(ScenarioSpec scenario, SessionOptions options = {});

  /// Server hello, sent as soon as a client connects.
  std::vector<std::string> connect();
  void disconnect();
  std::vector<std::string> receive(std::string_view text);

  /// One telemetry period: advances the simulation by realtime *
  /// telemetry_divider ticks (carrying fractions) unless paused, then
  /// returns the frame. Nothing is produced before the handshake.
  std::optional<std::string> period();

  /// Wall-clock time between periods.
  double period_seconds() const;

  bool connected() const { return connected_; }
  bool handshaken() const { return handshaken_; }
  bool paused() const { return paused_; }
  const Vec2& command() const { return command_; }
  const Simulation& simulation() const { return *sim_; }

  /// Names of the scenarios `select` can load.
  std::vector<std::string> available_scenarios() const;

 private:
  std::vector<std::string> apply(const ClientMessage& m);
  std::string ack(std::string_view action) const;
  std::string frame();

  SessionOptions options_;
  std::optional<Simulation> sim_;
  bool connected_{false};
  bool handshaken_{false};
  bool paused_{true};
  Vec2 command_{Vec2::Zero()};
  double tick_credit_{0.0};
  std::uint64_t seq_{0};
};

/// Serialized error message.
std::string error_message(const std::string& code, const std::string& message);

struct ServeOptions {
  std::string address{"127.0.0.1"};
  /// 0 picks a free port.
  unsigned short port{8765};
  SessionOptions session;
  /// Called once with the bound port before the first client is accepted.
  std::function<void(unsigned short)> on_listening;
};

/// WebSocket server, one client at a time, text messages carrying one JSON
/// object each. Further clients get a `busy` error and are closed. Runs until
/// `stop` is requested.
void serve_session(ScenarioSpec scenario, const ServeOptions& options, std::stop_token stop);

}  // namespace cotransport::sim
