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

#include <chrono>
#include <future>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <doctest.h>
#include <nlohmann/json.hpp>

#include "cotransport/session.hpp"

using namespace cotransport;
using namespace cotransport::sim;
using nlohmann::json;

namespace {

ScenarioSpec bundled(const std::string& name) {
  return load_scenario_file(std::string(COTRANSPORT_SCENARIO_DIR) + "/" + name + ".json");
}

SessionOptions with_dir() {
  SessionOptions o;
  o.scenario_dir = COTRANSPORT_SCENARIO_DIR;
  return o;
}

const std::string kHello = R"({"kind":"hello","protocol":"cotransport-telemetry","version":1})";

json one(const std::vector<std::string>& msgs, std::size_t i = 0) {
  REQUIRE(msgs.size() > i);
  return json::parse(msgs[i]);
}

// Frame with the fields that legitimately differ between two equal states removed.
json state_of(json frame) {
  frame.erase("seq");
  frame.erase("paused");
  return frame;
}

std::string error_code(const std::vector<std::string>& msgs) {
  const auto j = one(msgs);
  if (j["kind"] != "error") return "";
  return j["code"];
}

SessionCore ready(ScenarioSpec s, SessionOptions o = with_dir()) {
  SessionCore core(std::move(s), std::move(o));
  core.connect();
  core.receive(kHello);
  return core;
}

}  // namespace

TEST_CASE("client message parsing") {
  CHECK(std::holds_alternative<HelloMessage>(parse_client_message(kHello)));
  const auto c = parse_client_message(R"({"kind":"command","v":[0.3,-0.1]})");
  REQUIRE(std::holds_alternative<CommandMessage>(c));
  CHECK(std::get<CommandMessage>(c).v == Vec2(0.3, -0.1));
  const auto s = parse_client_message(R"({"kind":"control","action":"select","scenario":"scenario2"})");
  CHECK(std::get<ControlMessage>(s).action == ControlAction::Select);
  CHECK(std::get<ControlMessage>(s).scenario == "scenario2");
  CHECK(std::get<ControlMessage>(parse_client_message(R"({"kind":"control","action":"resume"})")).action ==
        ControlAction::Start);

  auto code = [](const std::string& text) {
    try {
      parse_client_message(text);
    } catch (const ProtocolError& e) {
      return e.code();
    }
    return std::string("accepted");
  };
  CHECK(code("{") == "malformed");
  CHECK(code("[1,2]") == "malformed");
  CHECK(code(R"({"kind":"command","v":[1e999,0]})") == "malformed");
  CHECK(code(R"({"v":[0,0]})") == "invalid");
  CHECK(code(R"({"kind":"teleport"})") == "unknown_kind");
  CHECK(code(R"({"kind":"command","v":[0]})") == "invalid");
  CHECK(code(R"({"kind":"command","v":["a",0]})") == "invalid");
  CHECK(code(R"({"kind":"command","v":[0,0],"w":1})") == "invalid");
  CHECK(code(R"({"kind":"control","action":"jump"})") == "invalid");
  CHECK(code(R"({"kind":"control","action":"select"})") == "invalid");
  CHECK(code(R"({"kind":"control","action":"pause","scenario":"x"})") == "invalid");
  CHECK(code(R"({"kind":"hello","protocol":"x"})") == "invalid");
}

TEST_CASE("handshake") {
  SessionCore core(bundled("scenario1"), with_dir());
  CHECK(!core.period());
  const auto hello = one(core.connect());
  CHECK(hello["kind"] == "hello");
  CHECK(hello["protocol"] == "cotransport-telemetry");
  CHECK(hello["version"] == 1);
  CHECK(hello["paused"] == true);
  CHECK(hello["telemetry_period"] == doctest::Approx(0.05));
  const auto names = hello["scenarios"].get<std::vector<std::string>>();
  CHECK(std::find(names.begin(), names.end(), "scenario2") != names.end());

  CHECK(!core.period());
  CHECK(error_code(core.receive(R"({"kind":"command","v":[0.3,0]})")) == "handshake_required");
  CHECK(error_code(core.receive(R"({"kind":"hello","protocol":"cotransport-telemetry","version":2})")) ==
        "version_mismatch");
  CHECK(!core.handshaken());

  const auto reply = core.receive(kHello);
  CHECK(one(reply)["kind"] == "control");
  CHECK(one(reply)["action"] == "hello");
  CHECK(one(reply, 1)["kind"] == "frame");
  CHECK(core.period());
}

TEST_CASE("paused sessions keep streaming with time frozen") {
  auto core = ready(bundled("scenario1"));
  core.receive(R"({"kind":"command","v":[0.3,0]})");
  const auto a = json::parse(*core.period());
  const auto b = json::parse(*core.period());
  CHECK(a["paused"] == true);
  CHECK(a["tick"] == 0);
  CHECK(b["tick"] == 0);
  CHECK(b["seq"].get<int>() == a["seq"].get<int>() + 1);
  CHECK(state_of(a) == state_of(b));
}

TEST_CASE("running sessions advance one telemetry period per frame, without gaps") {
  auto core = ready(bundled("scenario1"));
  CHECK(one(core.receive(R"({"kind":"control","action":"start"})"))["paused"] == false);
  const auto div = bundled("scenario1").timing.telemetry_divider;
  for (int i = 1; i <= 20; ++i) CHECK(json::parse(*core.period())["tick"] == i * div);

  SessionOptions fast = with_dir();
  fast.realtime = 2.0;
  auto f = ready(bundled("scenario1"), fast);
  f.receive(R"({"kind":"control","action":"start"})");
  CHECK(json::parse(*f.period())["tick"] == 2 * div);

  SessionOptions slow = with_dir();
  slow.realtime = 0.3;
  auto s = ready(bundled("scenario1"), slow);
  s.receive(R"({"kind":"control","action":"start"})");
  std::uint64_t last = 0;
  for (int i = 1; i <= 20; ++i) {
    const auto tick = json::parse(*s.period())["tick"].get<std::uint64_t>();
    CHECK(tick >= last);
    CHECK(tick == static_cast<std::uint64_t>(std::floor(i * 0.3 * div + 1e-9)));
    last = tick;
  }
}

TEST_CASE("a velocity command shows in the hand velocity within two frames") {
  auto core = ready(bundled("scenario1"));
  core.receive(R"({"kind":"control","action":"start"})");
  core.period();
  core.receive(R"({"kind":"command","v":[0.3,0.0]})");
  const auto f = json::parse(*core.period());
  CHECK(f["command"][0] == 0.3);
  CHECK(f["hand_velocity"][0].get<double>() > 0.0);
}

TEST_CASE("commands above v_max are clamped") {
  auto core = ready(bundled("scenario1"));
  core.receive(R"({"kind":"control","action":"start"})");
  core.receive(R"({"kind":"command","v":[3.0,4.0]})");
  const auto f = json::parse(*core.period());
  CHECK(std::hypot(f["command"][0].get<double>(), f["command"][1].get<double>()) == doctest::Approx(1.0));
}

TEST_CASE("reset returns to the freshly loaded state, paused") {
  auto core = ready(bundled("scenario1"));
  core.receive(R"({"kind":"control","action":"start"})");
  core.receive(R"({"kind":"command","v":[0.3,0.1]})");
  for (int i = 0; i < 30; ++i) core.period();
  const auto reply = core.receive(R"({"kind":"control","action":"reset"})");
  CHECK(one(reply)["action"] == "reset");
  CHECK(one(reply)["paused"] == true);
  CHECK(one(reply)["tick"] == 0);
  const Simulation fresh(bundled("scenario1"));
  CHECK(state_of(one(reply, 1)) == state_of(telemetry_frame(fresh, 0, true)));
  CHECK(core.command() == Vec2::Zero());
  CHECK(state_of(json::parse(*core.period())) == state_of(telemetry_frame(fresh, 0, true)));
}

TEST_CASE("rejected messages leave the state untouched") {
  auto core = ready(bundled("scenario1"));
  core.receive(R"({"kind":"control","action":"start"})");
  core.receive(R"({"kind":"command","v":[0.2,0.0]})");
  for (int i = 0; i < 5; ++i) core.period();
  core.receive(R"({"kind":"control","action":"pause"})");
  const auto before = state_of(json::parse(*core.period()));
  for (const char* bad : {"{", "nonsense", R"({"kind":"command","v":[1e999,0]})", R"({"kind":"command","v":[0,0],"x":1})",
                          R"({"kind":"control","action":"select","scenario":"../etc/passwd"})",
                          R"({"kind":"control","action":"select","scenario":"no_such_scenario"})"}) {
    const auto reply = core.receive(bad);
    CHECK_MESSAGE(one(reply)["kind"] == "error", bad);
  }
  CHECK(core.command() == Vec2(0.2, 0.0));
  CHECK(core.paused());
  CHECK(state_of(json::parse(*core.period())) == before);
}

TEST_CASE("select loads a sibling scenario") {
  auto core = ready(bundled("scenario1"));
  const auto reply = core.receive(R"({"kind":"control","action":"select","scenario":"scenario2"})");
  CHECK(one(reply)["scenario"] == "scenario2");
  const auto frame = one(reply, 1);
  CHECK(frame["scenario"] == "scenario2");
  bool found = false;
  for (const auto& w : frame["world"]) {
    if (w["name"] != "obstacle2") continue;
    found = true;
    double y = 0.0;
    for (const auto& v : w["vertices"]) y += v[1].get<double>() / 4.0;
    CHECK(y == doctest::Approx(1.0));
  }
  CHECK(found);

  SessionCore closed(bundled("scenario1"));
  closed.connect();
  closed.receive(kHello);
  CHECK(error_code(closed.receive(R"({"kind":"control","action":"select","scenario":"scenario2"})")) ==
        "select_failed");
}

TEST_CASE("pausing and resuming does not change the trajectory") {
  const std::vector<std::pair<int, std::string>> commands{
      {0, R"({"kind":"command","v":[0.3,0.0]})"},
      {12, R"({"kind":"command","v":[0.2,0.2]})"},
      {25, R"({"kind":"command","v":[0.3,0.0]})"}};
  auto run = [&](bool interrupted) {
    auto core = ready(bundled("scenario1"));
    core.receive(R"({"kind":"control","action":"start"})");
    std::size_t next = 0;
    for (int p = 0; p < 40; ++p) {
      if (next < commands.size() && commands[next].first == p) core.receive(commands[next++].second);
      if (interrupted && p % 7 == 3) {
        core.receive(R"({"kind":"control","action":"pause"})");
        for (int k = 0; k < 4; ++k) core.period();
        core.receive(R"({"kind":"control","action":"start"})");
      }
      core.period();
    }
    return state_of(json::parse(*core.period()));
  };
  CHECK(run(false) == run(true));
}

TEST_CASE("disconnect pauses, drops the command and needs a new hello") {
  auto core = ready(bundled("scenario1"));
  core.receive(R"({"kind":"control","action":"start"})");
  core.receive(R"({"kind":"command","v":[0.3,0.0]})");
  core.period();
  core.disconnect();
  CHECK(core.paused());
  CHECK(core.command() == Vec2::Zero());
  CHECK(!core.period());
  CHECK(one(core.connect())["paused"] == true);
  CHECK(error_code(core.receive(R"({"kind":"control","action":"start"})")) == "handshake_required");
}

// ---------------------------------------------------------------------------
// Over a real socket.

namespace {

namespace beast = boost::beast;
namespace asio = boost::asio;
using tcp = asio::ip::tcp;

struct Client {
  asio::io_context ioc;
  beast::websocket::stream<tcp::socket> ws{ioc};

  explicit Client(unsigned short port) {
    tcp::resolver resolver(ioc);
    asio::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws.handshake("127.0.0.1", "/");
    ws.text(true);
  }
  void send(const std::string& s) { ws.write(asio::buffer(s)); }
  json read() {
    beast::flat_buffer buf;
    ws.read(buf);
    return json::parse(beast::buffers_to_string(buf.data()));
  }
  json read_kind(const std::string& kind) {
    for (int i = 0; i < 200; ++i) {
      auto j = read();
      if (j["kind"] == kind) return j;
    }
    FAIL("no " << kind << " message");
    return {};
  }
};

struct Server {
  std::promise<unsigned short> bound;
  std::jthread thread;

  explicit Server(ScenarioSpec s) {
    ServeOptions o;
    o.port = 0;
    o.session = with_dir();
    o.on_listening = [this](unsigned short p) { bound.set_value(p); };
    thread = std::jthread([s = std::move(s), o](std::stop_token stop) { serve_session(s, o, stop); });
  }
  unsigned short port() { return bound.get_future().get(); }
};

}  // namespace

TEST_CASE("loopback session over WebSocket") {
  Server server(bundled("scenario1"));
  const auto port = server.port();

  {
    Client c(port);
    CHECK(c.read()["kind"] == "hello");
    c.send(kHello);
    CHECK(c.read()["action"] == "hello");
    CHECK(c.read()["kind"] == "frame");

    // Zero command: frames stream with a static state.
    const auto f1 = c.read_kind("frame");
    const auto f2 = c.read_kind("frame");
    CHECK(f2["seq"].get<int>() > f1["seq"].get<int>());
    CHECK(state_of(f1) == state_of(f2));

    // A second client is turned away while the first is connected.
    {
      Client other(port);
      const auto busy = other.read();
      CHECK(busy["kind"] == "error");
      CHECK(busy["code"] == "busy");
    }

    c.send(R"({"kind":"control","action":"start"})");
    CHECK(c.read_kind("control")["paused"] == false);
    c.send(R"({"kind":"command","v":[0.3,0.0]})");
    int frames = 0;
    bool reflected = false;
    while (frames < 2 && !reflected) {
      const auto f = c.read_kind("frame");
      ++frames;
      reflected = f["command"][0] == 0.3 && f["hand_velocity"][0].get<double>() > 0.0;
    }
    CHECK(reflected);

    c.send(R"({"kind":"control","action":"pause"})");
    const auto ack = c.read_kind("control");
    CHECK(ack["paused"] == true);
    const auto p1 = c.read_kind("frame");
    const auto p2 = c.read_kind("frame");
    CHECK(p1["paused"] == true);
    CHECK(p1["tick"] == p2["tick"]);

    c.send("not json");
    CHECK(c.read_kind("error")["code"] == "malformed");

    c.send(R"({"kind":"control","action":"reset"})");
    const auto reset_ack = c.read_kind("control");
    CHECK(reset_ack["action"] == "reset");
    CHECK(c.read_kind("frame")["tick"] == 0);
    c.ws.close(beast::websocket::close_code::normal);
  }

  // The server noticed the disconnect and serves the next client, paused.
  std::this_thread::sleep_for(std::chrono::milliseconds(150));
  Client again(port);
  const auto hello = again.read();
  CHECK(hello["kind"] == "hello");
  CHECK(hello["paused"] == true);
  again.ws.close(beast::websocket::close_code::normal);
}
