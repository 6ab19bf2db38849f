#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <random>
#include <string>
#include <thread>

#include "intlab/client.hpp"
#include "intlab/controller.hpp"
#include "intlab/server.hpp"

using namespace intlab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("intlab_srv_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const char* name) const { return (path / name).string(); }
};

/// One exchange with retries while the server finishes its previous session.
std::string send_retry(const std::string& ip, std::uint16_t port, const std::string& cmd) {
  for (int attempt = 0;; ++attempt) {
    try {
      return client_send(ip, port, cmd);
    } catch (const IoError&) {
      REQUIRE(attempt < 100);
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }
}

/// Controller + server on an ephemeral loopback port, served from a thread.
struct LiveServer {
  TempDir dir;
  Controller controller;
  ControllerServer server;
  std::thread thread;

  explicit LiveServer(const std::string& ip = "127.0.0.1")
      : controller(Controller::open(ChannelBank(preset_ideal()), ParamStore(dir.file("p.bin")))),
        server({ip, 0}, controller) {
    server.bind();
    thread = std::thread([this] { server.serve_forever(); });
  }

  ~LiveServer() {
    server.stop();
    thread.join();
  }

  std::uint16_t port() const { return server.port(); }
};

}  // namespace

TEST_SUITE_BEGIN("server");

TEST_CASE("session: connect, read, quit") {
  LiveServer live;
  ClientSession session("127.0.0.1", live.port());
  CHECK(session.send_line("READAll") == "OK 0;0;0;0;0;0;0;0");
  CHECK(session.send_line("ALL2;2;2;2;2;2;2;2") == "OK");
  CHECK(session.send_line("READAll") == "OK 2;2;2;2;2;2;2;2");
  CHECK(session.send_line("QUIT") == "OK");
}

TEST_CASE("state survives sessions and abrupt disconnects") {
  LiveServer live;
  {
    ClientSession s("127.0.0.1", live.port());
    CHECK(s.send_line("INTE6") == "OK");
    // no QUIT: drop the socket mid-session
  }
  // the server must be back to listening with state intact
  CHECK(send_retry("127.0.0.1", live.port(), "READAll") == "OK 6;6;6;6;6;6;6;6");
}

TEST_CASE("second concurrent connection is turned away busy") {
  LiveServer live;
  ClientSession first("127.0.0.1", live.port());
  CHECK(first.send_line("READAll") == "OK 0;0;0;0;0;0;0;0");

  ClientSession second("127.0.0.1", live.port());
  // the server answers the banner without waiting for a command
  CHECK(second.send_line("READAll") == "ERR busy");

  // the original session is unaffected
  CHECK(first.send_line("READAll") == "OK 0;0;0;0;0;0;0;0");
  CHECK(first.send_line("QUIT") == "OK");
}

TEST_CASE("errors travel the wire unchanged") {
  LiveServer live;
  ClientSession s("127.0.0.1", live.port());
  CHECK(s.send_line("FOO") == "ERR unknown");
  CHECK(s.send_line("ALL9;9;9;9;9;9;9;9") == "ERR range");
  CHECK(s.send_line("NETx;y;z") == "ERR addr");
  CHECK(s.send_line("QUIT") == "OK");
}

TEST_CASE("refused connections are reported as such") {
  try {
    ClientSession s("127.0.0.1", 1);  // nothing listens on port 1
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("refused") != std::string::npos);
  }
}

TEST_CASE("NET takes effect on the next listen") {
  LiveServer live("127.0.0.2");
  const auto port = live.port();
  {
    ClientSession s("127.0.0.2", port);
    CHECK(s.send_line("NET127.0.0.1;255.255.255.0;127.0.0.1") == "OK");
    // session keeps running on the old address
    CHECK(s.send_line("READAll") == "OK 0;0;0;0;0;0;0;0");
    CHECK(s.send_line("QUIT") == "OK");
  }
  // after the session the server re-binds to the stored address
  CHECK(send_retry("127.0.0.1", port, "READAll") == "OK 0;0;0;0;0;0;0;0");
}

TEST_CASE("overlong unterminated input ends the session, not the server") {
  LiveServer live;
  {
    ClientSession s("127.0.0.1", live.port());
    // 100k bytes overflow the line buffer before any newline shows up; the
    // server refuses the line and drops the session
    std::string huge(100'000, 'A');
    try {
      CHECK(s.send_line(huge) == "ERR unknown");
    } catch (const IoError&) {
      // the close can beat the reply; either is fine
    }
  }
  CHECK(send_retry("127.0.0.1", live.port(), "READAll") == "OK 0;0;0;0;0;0;0;0");
}

TEST_SUITE_END();
