#pragma once

// WebSocket front end for a live session. One tick thread owns the Session;
// one I/O thread runs every socket. They meet only at two queues: inbound
// commands (drained at tick boundaries) and outbound frames (posted to the
// I/O thread). The tick thread is the only writer of the session log.
//
// Endpoints: `GET /session` upgrades to a WebSocket carrying one JSON frame
// per message; any other GET is served from the static directory, if set.
// The first client to connect holds the operator role; later clients are
// read-only observers. The role passes to the next new client when the
// operator disconnects.

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "hhil/runner.hpp"
#include "hhil/telemetry.hpp"

namespace hhil::server {

struct ServerOptions {
  std::string address = "127.0.0.1";
  std::uint16_t port = 8080;  // 0 picks a free port
  double timescale = 1.0;     // simulated seconds per wall second; 0 runs unthrottled
  std::string log_path;       // session JSONL; empty keeps the log in memory only
  std::string static_dir;     // console bundle; empty disables static serving
  std::optional<double> max_seconds;  // stop after this much simulated time
  bool stop_when_settled = true;
};

class SessionServer {
 public:
  SessionServer(const runner::EpisodeSetup& setup, ServerOptions options);
  ~SessionServer();
  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;

  /// Binds, starts the I/O and tick threads and returns the bound port.
  std::uint16_t start();
  /// Blocks until the tick loop ends (settled, time limit or stop()).
  void wait();
  void stop();
  /// Asks the tick loop to end at its next boundary. Async-signal-safe.
  void request_stop() noexcept;

  /// Copy of the session log so far.
  std::vector<telemetry::SessionEvent> log() const;
  double sim_time() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hhil::server
