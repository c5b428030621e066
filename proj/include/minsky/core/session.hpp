#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "minsky/core/scenario.hpp"

namespace httplib {
class Server;
}

namespace minsky::session {

struct Session {
  std::string id;
  Scenario scenario;
  abm::SimConfig base;       // config without scheduled interventions, for replay
  abm::SimState state;
  std::vector<abm::TickDelta> history;  // every committed tick, gap-free
  std::chrono::system_clock::time_point created, updated;
  int subscribers = 0;
  bool closed = false;

  std::mutex mu;  // single writer: every read or write of the fields above
  std::condition_variable changed;
};

/// In-memory session registry. Each call locks the target session, so ticks
/// and interventions on one session are serialized while different sessions
/// proceed independently.
class SessionManager {
public:
  struct Created {
    std::string id;
    json snapshot;
  };

  Created create(const json& scenario_doc, const std::string& base_dir = ".");
  json snapshot(const std::string& id, bool include_firms = true);
  /// Commits n ticks; returns their deltas.
  json advance(const std::string& id, std::int64_t n_ticks);
  /// Applies the intervention (effective next tick) and returns an ack with a
  /// one-tick preview computed on a copy of the updated state.
  json intervene(const std::string& id, const json& intervention);
  /// What-if: copy, optionally apply, tick once. Never touches the session.
  json preview(const std::string& id, const std::optional<json>& intervention);
  json deltas_since(const std::string& id, std::int64_t since_tick);
  json replay_log(const std::string& id);
  /// Writes the scenario, intervention log and tick to disk as JSON.
  std::string persist(const std::string& id, const std::string& path);
  /// Rebuilds a session from a persisted file by replaying its log.
  Created restore(const std::string& path);
  void remove(const std::string& id);
  std::size_t size();

  /// Blocks until the session has a delta with tick > since_tick, the timeout
  /// expires or the session is closed. Returns the new deltas (possibly empty).
  json wait_deltas(const std::string& id, std::int64_t since_tick, std::chrono::milliseconds timeout);
  void close_all();
  /// Adjusts the live stream-subscriber count shown in snapshots.
  void subscribe(const std::string& id, int delta);

private:
  std::shared_ptr<Session> find(const std::string& id);
  std::string next_id();
  Created adopt(std::shared_ptr<Session> s);

  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t counter_ = 0;
  std::uint64_t salt_ = 0;
};

/// JSON-over-HTTP front end, routes under /api/v1.
class Server {
public:
  explicit Server(SessionManager& mgr);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& bind, int port);
  /// Serves on the calling thread until stop().
  void run(const std::string& bind, int port);
  void stop();
  int port() const { return port_; }

private:
  void routes();

  SessionManager& mgr_;
  std::unique_ptr<httplib::Server> http_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace minsky::session
