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

#include "cotransport/session.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <regex>
#include <thread>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <nlohmann/json.hpp>

namespace cotransport::sim {

using nlohmann::json;

std::string_view to_string(ControlAction a) {
  switch (a) {
    case ControlAction::Start: return "start";
    case ControlAction::Pause: return "pause";
    case ControlAction::Reset: return "reset";
    case ControlAction::Select: return "select";
  }
  return "?";
}

namespace {

void only_keys(const json& j, std::initializer_list<std::string_view> keys) {
  for (const auto& [k, v] : j.items())
    if (std::find(keys.begin(), keys.end(), k) == keys.end())
      throw ProtocolError("invalid", "unknown field '" + k + "'");
}

const json& field(const json& j, const char* key) {
  if (!j.contains(key)) throw ProtocolError("invalid", std::string("missing field '") + key + "'");
  return j.at(key);
}

}  // namespace

ClientMessage parse_client_message(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ProtocolError("malformed", e.what());
  }
  if (!j.is_object()) throw ProtocolError("malformed", "message must be a JSON object");
  const auto& kind = field(j, "kind");
  if (!kind.is_string()) throw ProtocolError("invalid", "'kind' must be a string");
  const auto k = kind.get<std::string>();

  if (k == "hello") {
    only_keys(j, {"kind", "protocol", "version"});
    const auto& p = field(j, "protocol");
    const auto& v = field(j, "version");
    if (!p.is_string() || !v.is_number_integer())
      throw ProtocolError("invalid", "hello needs a string protocol and an integer version");
    return HelloMessage{p.get<std::string>(), v.get<int>()};
  }
  if (k == "command") {
    only_keys(j, {"kind", "v"});
    const auto& v = field(j, "v");
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      throw ProtocolError("invalid", "'v' must be [vx, vy]");
    const Vec2 out(v[0].get<double>(), v[1].get<double>());
    if (!out.allFinite()) throw ProtocolError("invalid", "'v' must be finite");
    return CommandMessage{out};
  }
  if (k == "control") {
    only_keys(j, {"kind", "action", "scenario"});
    const auto& a = field(j, "action");
    if (!a.is_string()) throw ProtocolError("invalid", "'action' must be a string");
    const auto action = a.get<std::string>();
    ControlMessage m;
    if (action == "start" || action == "resume") {
      m.action = ControlAction::Start;
    } else if (action == "pause") {
      m.action = ControlAction::Pause;
    } else if (action == "reset") {
      m.action = ControlAction::Reset;
    } else if (action == "select") {
      m.action = ControlAction::Select;
      const auto& s = field(j, "scenario");
      if (!s.is_string()) throw ProtocolError("invalid", "'scenario' must be a string");
      m.scenario = s.get<std::string>();
    } else {
      throw ProtocolError("invalid", "unknown action '" + action + "'");
    }
    if (m.action != ControlAction::Select && j.contains("scenario"))
      throw ProtocolError("invalid", "'scenario' only goes with select");
    return m;
  }
  throw ProtocolError("unknown_kind", "unknown message kind '" + k + "'");
}

std::string error_message(const std::string& code, const std::string& message) {
  return json{{"kind", "error"}, {"code", code}, {"message", message}}.dump();
}

SessionCore::SessionCore(ScenarioSpec scenario, SessionOptions options)
    : options_(std::move(options)) {
  if (!(options_.realtime > 0.0) || !std::isfinite(options_.realtime))
    throw std::invalid_argument("realtime factor must be positive");
  sim_.emplace(std::move(scenario), options_.seed);
}

double SessionCore::period_seconds() const {
  const auto& t = sim_->scenario().timing;
  return t.control_dt * t.telemetry_divider;
}

std::vector<std::string> SessionCore::available_scenarios() const {
  std::vector<std::string> out;
  if (options_.scenario_dir.empty()) return out;
  std::error_code ec;
  for (const auto& e : std::filesystem::directory_iterator(options_.scenario_dir, ec))
    if (e.path().extension() == ".json") out.push_back(e.path().stem().string());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> SessionCore::connect() {
  connected_ = true;
  handshaken_ = false;
  const auto& sc = sim_->scenario();
  return {json{{"kind", "hello"},
               {"protocol", kProtocolName},
               {"version", kProtocolVersion},
               {"scenario", sc.name},
               {"scenarios", available_scenarios()},
               {"control_dt", sc.timing.control_dt},
               {"telemetry_period", period_seconds()},
               {"realtime", options_.realtime},
               {"v_max", sc.human.v_max},
               {"finish_x", sc.finish_x()},
               {"paused", paused_}}
              .dump()};
}

void SessionCore::disconnect() {
  connected_ = false;
  handshaken_ = false;
  paused_ = true;
  command_ = Vec2::Zero();
}

std::vector<std::string> SessionCore::receive(std::string_view text) {
  try {
    return apply(parse_client_message(text));
  } catch (const ProtocolError& e) {
    return {error_message(e.code(), e.what())};
  }
}

std::string SessionCore::ack(std::string_view action) const {
  return json{{"kind", "control"},
              {"action", action},
              {"ok", true},
              {"paused", paused_},
              {"tick", sim_->state().tick},
              {"scenario", sim_->scenario().name}}
      .dump();
}

std::string SessionCore::frame() { return telemetry_frame(*sim_, seq_++, paused_).dump(); }

std::vector<std::string> SessionCore::apply(const ClientMessage& m) {
  if (const auto* h = std::get_if<HelloMessage>(&m)) {
    if (h->protocol != kProtocolName || h->version != kProtocolVersion)
      throw ProtocolError("version_mismatch",
                          "server speaks " + std::string(kProtocolName) + " version " +
                              std::to_string(kProtocolVersion));
    handshaken_ = true;
    return {ack("hello"), frame()};
  }
  if (!handshaken_) throw ProtocolError("handshake_required", "send hello first");

  if (const auto* c = std::get_if<CommandMessage>(&m)) {
    command_ = c->v;
    return {};
  }

  const auto& ctl = std::get<ControlMessage>(m);
  switch (ctl.action) {
    case ControlAction::Start:
      paused_ = false;
      return {ack(to_string(ctl.action))};
    case ControlAction::Pause:
      paused_ = true;
      return {ack(to_string(ctl.action))};
    case ControlAction::Reset:
      sim_->reset();
      break;
    case ControlAction::Select: {
      static const std::regex name_re("[A-Za-z0-9_-]+");
      if (options_.scenario_dir.empty())
        throw ProtocolError("select_failed", "scenario selection is disabled");
      if (!std::regex_match(ctl.scenario, name_re))
        throw ProtocolError("select_failed", "bad scenario name '" + ctl.scenario + "'");
      try {
        auto spec = load_scenario_file(options_.scenario_dir / (ctl.scenario + ".json"));
        sim_.emplace(std::move(spec), options_.seed);
      } catch (const std::exception& e) {
        throw ProtocolError("select_failed", e.what());
      }
      break;
    }
  }
  // Reset and select land paused, with the initial state sent right away.
  paused_ = true;
  command_ = Vec2::Zero();
  tick_credit_ = 0.0;
  return {ack(to_string(ctl.action)), frame()};
}

std::optional<std::string> SessionCore::period() {
  if (!connected_ || !handshaken_) return std::nullopt;
  if (!paused_) {
    tick_credit_ += options_.realtime * sim_->scenario().timing.telemetry_divider;
    while (tick_credit_ >= 1.0 - 1e-9) {
      sim_->step(command_);
      tick_credit_ -= 1.0;
    }
  }
  return frame();
}

// ---------------------------------------------------------------------------
// Transport

namespace {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

struct Event {
  enum class Type { Connected, Message, Closed } type;
  std::uint64_t connection{0};
  std::string text;
};

class EventQueue {
 public:
  void push(Event e) {
    std::lock_guard lock(mutex_);
    events_.push_back(std::move(e));
  }
  std::deque<Event> drain() {
    std::lock_guard lock(mutex_);
    return std::exchange(events_, {});
  }

 private:
  std::mutex mutex_;
  std::deque<Event> events_;
};

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, std::uint64_t id, EventQueue& events)
      : ws_(std::move(socket)), id_(id), events_(events) {}

  std::uint64_t id() const { return id_; }

  void start() {
    ws_.text(true);
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return self->fail();
      self->events_.push({Event::Type::Connected, self->id_, {}});
      self->read();
    });
  }

  /// Thread-safe. Frames are dropped while the client is far behind.
  void send(std::string text, bool droppable) {
    asio::post(ws_.get_executor(), [self = shared_from_this(), text = std::move(text), droppable]() mutable {
      if (self->closed_ || (droppable && self->outbox_.size() >= kMaxQueued)) return;
      self->outbox_.push_back(std::move(text));
      if (self->outbox_.size() == 1) self->write();
    });
  }

  void close() {
    asio::post(ws_.get_executor(), [self = shared_from_this()] {
      if (self->closed_) return;
      self->closed_ = true;
      self->ws_.async_close(websocket::close_code::going_away, [self](beast::error_code) {});
    });
  }

 private:
  static constexpr std::size_t kMaxQueued = 64;

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->fail();
      self->events_.push({Event::Type::Message, self->id_, beast::buffers_to_string(self->buffer_.data())});
      self->buffer_.consume(self->buffer_.size());
      self->read();
    });
  }

  void write() {
    ws_.async_write(asio::buffer(outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->fail();
      self->outbox_.pop_front();
      if (!self->outbox_.empty()) self->write();
    });
  }

  void fail() {
    if (reported_) return;
    reported_ = true;
    closed_ = true;
    outbox_.clear();
    events_.push({Event::Type::Closed, id_, {}});
  }

  websocket::stream<tcp::socket> ws_;
  std::uint64_t id_;
  EventQueue& events_;
  beast::flat_buffer buffer_;
  std::deque<std::string> outbox_;
  bool closed_{false};
  bool reported_{false};
};

}  // namespace

void serve_session(ScenarioSpec scenario, const ServeOptions& options, std::stop_token stop) {
  SessionCore core(std::move(scenario), options.session);
  asio::io_context ioc(1);
  auto guard = asio::make_work_guard(ioc);
  tcp::acceptor acceptor(ioc, {asio::ip::make_address(options.address), options.port});
  EventQueue events;

  // Accepted connections by id; the owner loop decides which one is served.
  std::map<std::uint64_t, std::shared_ptr<Connection>> pending;
  std::mutex pending_mutex;
  std::uint64_t next_id = 1;
  std::function<void()> accept = [&] {
    acceptor.async_accept(asio::make_strand(ioc), [&](beast::error_code ec, tcp::socket socket) {
      if (ec) return;  // acceptor closed
      auto conn = std::make_shared<Connection>(std::move(socket), next_id++, events);
      {
        std::lock_guard lock(pending_mutex);
        pending.emplace(conn->id(), conn);
      }
      conn->start();
      accept();
    });
  };
  accept();
  if (options.on_listening) options.on_listening(acceptor.local_endpoint().port());
  std::thread io([&] { ioc.run(); });

  std::shared_ptr<Connection> client;
  const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(core.period_seconds()));
  auto next = std::chrono::steady_clock::now();
  while (!stop.stop_requested()) {
    for (auto& e : events.drain()) {
      std::shared_ptr<Connection> conn;
      {
        std::lock_guard lock(pending_mutex);
        if (auto it = pending.find(e.connection); it != pending.end()) conn = it->second;
        if (e.type == Event::Type::Closed) pending.erase(e.connection);
      }
      switch (e.type) {
        case Event::Type::Connected:
          if (!conn) break;
          if (client) {
            conn->send(error_message("busy", "another client is connected"), false);
            conn->close();
          } else {
            client = conn;
            for (auto& m : core.connect()) client->send(std::move(m), false);
          }
          break;
        case Event::Type::Message:
          if (client && client->id() == e.connection)
            for (auto& m : core.receive(e.text)) client->send(std::move(m), false);
          break;
        case Event::Type::Closed:
          if (client && client->id() == e.connection) {
            client.reset();
            core.disconnect();
          }
          break;
      }
    }
    if (client)
      if (auto f = core.period()) client->send(std::move(*f), true);
    next += period;
    const auto now = std::chrono::steady_clock::now();
    if (next < now) next = now;  // fell behind: skip rather than burst
    std::this_thread::sleep_until(next);
  }

  if (client) client->close();
  asio::post(ioc, [&] { acceptor.close(); });
  guard.reset();
  // Give pending closes a moment, then stop.
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  ioc.stop();
  io.join();
  std::lock_guard lock(pending_mutex);
  pending.clear();
}

}  // namespace cotransport::sim
