#include "minsky/core/session.hpp"

#include <ctime>
#include <filesystem>
#include <random>
#include <sstream>

#include <httplib.h>

#include "minsky/core/rng.hpp"

namespace minsky::session {

namespace {

std::string iso_time(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json deltas_after(const Session& s, std::int64_t since) {
  json out = json::array();
  for (const auto& d : s.history)
    if (d.tick > since) out.push_back(to_json(d));
  return out;
}

// Applies config-scheduled interventions due at the current tick, then ticks.
abm::TickDelta step_session(Session& s) {
  for (const auto& l : s.scenario.sim.scheduled)
    if (l.tick == s.state.tick) abm::apply_intervention(s.state, l.intervention);
  return abm::advance(s.state);
}

json error_body(const Error& e) {
  static const char* names[] = {"", "internal", "config", "numerical", "io", "not_found"};
  const int k = static_cast<int>(e.kind());
  json j = {{"error", {{"kind", names[k >= 1 && k <= 5 ? k : 1]}, {"message", e.what()}}}};
  if (auto* ce = dynamic_cast<const ConfigError*>(&e)) {
    json issues = json::array();
    for (const auto& i : ce->issues()) issues.push_back({{"pointer", i.pointer}, {"message", i.message}});
    j["error"]["issues"] = issues;
  }
  return j;
}

int http_status(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::config: return 400;
    case ErrorKind::not_found: return 404;
    case ErrorKind::numerical: return 422;
    case ErrorKind::io: return 500;
    case ErrorKind::internal: return 500;
  }
  return 500;
}

}  // namespace

std::string SessionManager::next_id() {
  std::lock_guard lk(mu_);
  if (salt_ == 0) {
    std::random_device rd;
    salt_ = (static_cast<std::uint64_t>(rd()) << 32) ^ rd() ^
            static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count());
  }
  std::ostringstream os;
  os << 's' << std::hex << derive_seed(salt_, ++counter_);
  return os.str();
}

std::shared_ptr<Session> SessionManager::find(const std::string& id) {
  std::lock_guard lk(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("unknown session: " + id);
  return it->second;
}

SessionManager::Created SessionManager::adopt(std::shared_ptr<Session> s) {
  s->id = next_id();
  {
    std::lock_guard lk(mu_);
    sessions_[s->id] = s;
  }
  return {s->id, snapshot(s->id)};
}

SessionManager::Created SessionManager::create(const json& doc, const std::string& base_dir) {
  auto s = std::make_shared<Session>();
  s->scenario = parse_scenario(doc, base_dir);
  s->base = s->scenario.sim;
  s->base.scheduled.clear();
  s->state = abm::init_scenario(s->scenario.sim);
  s->created = s->updated = std::chrono::system_clock::now();
  return adopt(std::move(s));
}

json SessionManager::snapshot(const std::string& id, bool include_firms) {
  auto s = find(id);
  std::lock_guard lk(s->mu);
  json j = snapshot_json(s->scenario, s->state, include_firms);
  j["session"] = s->id;
  j["created"] = iso_time(s->created);
  j["updated"] = iso_time(s->updated);
  j["subscribers"] = s->subscribers;
  return j;
}

json SessionManager::advance(const std::string& id, std::int64_t n_ticks) {
  if (n_ticks < 0) throw ParameterError("advance: ticks must be >= 0");
  auto s = find(id);
  json out = json::array();
  {
    std::lock_guard lk(s->mu);
    for (std::int64_t t = 0; t < n_ticks; ++t) {
      s->history.push_back(step_session(*s));
      out.push_back(to_json(s->history.back()));
    }
    if (n_ticks > 0) s->updated = std::chrono::system_clock::now();
  }
  s->changed.notify_all();
  return out;
}

json SessionManager::intervene(const std::string& id, const json& intervention) {
  const abm::Intervention iv = intervention_from_json(intervention);
  auto s = find(id);
  std::lock_guard lk(s->mu);
  abm::apply_intervention(s->state, iv);  // throws before mutating on bad targets
  s->updated = std::chrono::system_clock::now();
  abm::SimState what_if = s->state;
  const auto d = abm::advance(what_if);
  return {{"accepted", true},
          {"logged_at_tick", s->state.tick},
          {"effective_tick", s->state.tick + 1},
          {"intervention", to_json(iv)},
          {"preview", to_json(d)},
          {"preview_cumulative_failed", what_if.cumulative_failed}};
}

json SessionManager::preview(const std::string& id, const std::optional<json>& intervention) {
  std::optional<abm::Intervention> iv;
  if (intervention) iv = intervention_from_json(*intervention);
  auto s = find(id);
  abm::SimState what_if;
  std::uint64_t before = 0;
  {
    std::lock_guard lk(s->mu);
    what_if = s->state;
    before = state_hash(s->state);
  }
  if (iv) abm::apply_intervention(what_if, *iv);
  const auto d = abm::advance(what_if);
  std::ostringstream hs;
  hs << std::hex << before;
  return {{"preview", to_json(d)},
          {"preview_cumulative_failed", what_if.cumulative_failed},
          {"committed_state_hash", hs.str()}};
}

json SessionManager::deltas_since(const std::string& id, std::int64_t since_tick) {
  auto s = find(id);
  std::lock_guard lk(s->mu);
  return deltas_after(*s, since_tick);
}

json SessionManager::wait_deltas(const std::string& id, std::int64_t since_tick,
                                 std::chrono::milliseconds timeout) {
  auto s = find(id);
  std::unique_lock lk(s->mu);
  s->changed.wait_for(lk, timeout, [&] {
    return s->closed || (!s->history.empty() && s->history.back().tick > since_tick);
  });
  return {{"deltas", deltas_after(*s, since_tick)}, {"closed", s->closed}};
}

json SessionManager::replay_log(const std::string& id) {
  auto s = find(id);
  std::lock_guard lk(s->mu);
  json log = json::array();
  for (const auto& l : s->state.log) log.push_back(to_json(l));
  json deltas = json::array();
  for (const auto& d : s->history) deltas.push_back(to_json(d));
  return {{"session", s->id},
          {"scenario", s->scenario.document},
          {"interventions", log},
          {"tick", s->state.tick},
          {"deltas", deltas}};
}

std::string SessionManager::persist(const std::string& id, const std::string& path) {
  auto s = find(id);
  json doc;
  {
    std::lock_guard lk(s->mu);
    json log = json::array();
    for (const auto& l : s->state.log) log.push_back(to_json(l));
    doc = {{"format", "minsky-session"},
           {"version", kVersion},
           {"scenario", s->scenario.document},
           {"interventions", log},
           {"tick", s->state.tick},
           {"state_hash", [&] {
              std::ostringstream hs;
              hs << std::hex << state_hash(s->state);
              return hs.str();
            }()}};
  }
  const std::string out = path.empty() ? "session_" + id + ".json" : path;
  write_text_file(out, doc.dump(2) + "\n");
  return out;
}

SessionManager::Created SessionManager::restore(const std::string& path) {
  const json doc = load_json_file(path);
  if (!doc.is_object() || doc.value("format", "") != "minsky-session" || !doc.contains("scenario"))
    throw ConfigError(std::vector<ConfigIssue>{{"/format", "not a persisted session file"}});
  auto s = std::make_shared<Session>();
  const auto dir = std::filesystem::path(path).parent_path().string();
  s->scenario = parse_scenario(doc["scenario"], dir.empty() ? "." : dir);
  s->base = s->scenario.sim;
  s->base.scheduled.clear();

  // The persisted log already contains the scheduled interventions that fired.
  std::vector<abm::LoggedIntervention> log;
  for (const auto& j : doc.value("interventions", json::array()))
    log.push_back({j.at("tick").get<std::int64_t>(), intervention_from_json(j)});
  const auto until = doc.value("tick", std::int64_t{0});
  s->state = abm::init_scenario(s->base);
  std::size_t next = 0;
  while (true) {
    while (next < log.size() && log[next].tick == s->state.tick)
      abm::apply_intervention(s->state, log[next++].intervention);
    if (s->state.tick >= until) break;
    s->history.push_back(abm::advance(s->state));
  }
  // Scheduled entries are already in the log; keep them from firing twice.
  s->scenario.sim.scheduled.clear();
  s->created = s->updated = std::chrono::system_clock::now();
  return adopt(std::move(s));
}

void SessionManager::remove(const std::string& id) {
  std::shared_ptr<Session> s;
  {
    std::lock_guard lk(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFoundError("unknown session: " + id);
    s = it->second;
    sessions_.erase(it);
  }
  {
    std::lock_guard lk(s->mu);
    s->closed = true;
  }
  s->changed.notify_all();
}

std::size_t SessionManager::size() {
  std::lock_guard lk(mu_);
  return sessions_.size();
}

void SessionManager::close_all() {
  std::vector<std::shared_ptr<Session>> all;
  {
    std::lock_guard lk(mu_);
    for (auto& [_, s] : sessions_) all.push_back(s);
  }
  for (auto& s : all) {
    {
      std::lock_guard lk(s->mu);
      s->closed = true;
    }
    s->changed.notify_all();
  }
}

void SessionManager::subscribe(const std::string& id, int delta) {
  auto s = find(id);
  std::lock_guard lk(s->mu);
  s->subscribers += delta;
}

Server::Server(SessionManager& mgr) : mgr_(mgr), http_(std::make_unique<httplib::Server>()) {
  routes();
}

Server::~Server() { stop(); }

void Server::routes() {
  auto& svr = *http_;
  auto send = [](httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  // Wraps a handler so model errors become JSON error payloads.
  auto guarded = [send](auto fn) {
    return [send, fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        send(res, http_status(e), error_body(e));
      } catch (const json::exception& e) {
        send(res, 400, {{"error", {{"kind", "config"}, {"message", e.what()}}}});
      } catch (const std::exception& e) {
        send(res, 500, {{"error", {{"kind", "internal"}, {"message", e.what()}}}});
      }
    };
  };
  auto body_json = [](const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    return json::parse(req.body);
  };

  svr.Get("/api/v1/health", guarded([send](const httplib::Request&, httplib::Response& res) {
    send(res, 200, {{"status", "ok"}, {"version", kVersion}});
  }));

  svr.Post("/api/v1/sessions", guarded([this, send, body_json](const httplib::Request& req,
                                                                httplib::Response& res) {
    auto created = mgr_.create(body_json(req));
    send(res, 201, {{"id", created.id}, {"snapshot", created.snapshot}});
  }));

  svr.Get(R"(/api/v1/sessions/([^/]+))",
          guarded([this, send](const httplib::Request& req, httplib::Response& res) {
            const bool firms = req.get_param_value("firms") != "false";
            send(res, 200, mgr_.snapshot(req.matches[1], firms));
          }));

  svr.Delete(R"(/api/v1/sessions/([^/]+))",
             guarded([this, send](const httplib::Request& req, httplib::Response& res) {
               mgr_.remove(req.matches[1]);
               send(res, 200, {{"deleted", std::string(req.matches[1])}});
             }));

  svr.Post(R"(/api/v1/sessions/([^/]+)/advance)",
           guarded([this, send, body_json](const httplib::Request& req, httplib::Response& res) {
             const json b = body_json(req);
             const auto n = b.value("ticks", std::int64_t{1});
             send(res, 200, {{"deltas", mgr_.advance(req.matches[1], n)}});
           }));

  svr.Post(R"(/api/v1/sessions/([^/]+)/intervene)",
           guarded([this, send, body_json](const httplib::Request& req, httplib::Response& res) {
             send(res, 200, mgr_.intervene(req.matches[1], body_json(req)));
           }));

  svr.Post(R"(/api/v1/sessions/([^/]+)/preview)",
           guarded([this, send, body_json](const httplib::Request& req, httplib::Response& res) {
             const json b = body_json(req);
             std::optional<json> iv;
             if (!b.empty()) iv = b;
             send(res, 200, mgr_.preview(req.matches[1], iv));
           }));

  svr.Get(R"(/api/v1/sessions/([^/]+)/deltas)",
          guarded([this, send](const httplib::Request& req, httplib::Response& res) {
            std::int64_t since = -1;
            if (req.has_param("since")) since = std::stoll(req.get_param_value("since"));
            send(res, 200, {{"deltas", mgr_.deltas_since(req.matches[1], since)}});
          }));

  svr.Get(R"(/api/v1/sessions/([^/]+)/replay)",
          guarded([this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, 200, mgr_.replay_log(req.matches[1]));
          }));

  svr.Post(R"(/api/v1/sessions/([^/]+)/persist)",
           guarded([this, send, body_json](const httplib::Request& req, httplib::Response& res) {
             const json b = body_json(req);
             std::string name = b.value("file", std::string());
             // Only bare file names over HTTP; the file lands in the working directory.
             if (name.find('/') != std::string::npos || name.find('\\') != std::string::npos ||
                 name == "." || name == "..")
               throw ConfigError(std::vector<ConfigIssue>{{"/file", "must be a bare file name"}});
             send(res, 200, {{"path", mgr_.persist(req.matches[1], name)}});
           }));

  // Server-sent events: one "delta" event per committed tick.
  svr.Get(R"(/api/v1/sessions/([^/]+)/stream)",
          guarded([this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            auto snap = mgr_.snapshot(id, false);
            auto cursor = std::make_shared<std::int64_t>(snap["tick"].get<std::int64_t>());
            if (req.has_param("since")) *cursor = std::stoll(req.get_param_value("since"));
            mgr_.subscribe(id, +1);
            res.set_header("Cache-Control", "no-cache");
            res.set_chunked_content_provider(
                "text/event-stream",
                [this, id, cursor](std::size_t, httplib::DataSink& sink) {
                  json batch;
                  try {
                    batch = mgr_.wait_deltas(id, *cursor, std::chrono::milliseconds(500));
                  } catch (const NotFoundError&) {
                    sink.done();
                    return true;
                  }
                  std::string out;
                  for (const auto& d : batch["deltas"]) {
                    *cursor = d["tick"].get<std::int64_t>();
                    out += "id: " + std::to_string(*cursor) + "\nevent: delta\ndata: " + d.dump() + "\n\n";
                  }
                  if (out.empty()) out = ": keepalive\n\n";
                  if (!sink.write(out.data(), out.size())) return false;
                  if (batch["closed"].get<bool>()) sink.done();
                  return true;
                },
                [this, id](bool) {
                  try {
                    mgr_.subscribe(id, -1);
                  } catch (const NotFoundError&) {
                  }
                });
          }));
}

int Server::start(const std::string& bind, int port) {
  if (port == 0)
    port_ = http_->bind_to_any_port(bind);
  else
    port_ = http_->bind_to_port(bind, port) ? port : -1;
  if (port_ < 0) throw IoError("cannot bind " + bind + ":" + std::to_string(port));
  thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
  return port_;
}

void Server::run(const std::string& bind, int port) {
  if (port == 0)
    port_ = http_->bind_to_any_port(bind);
  else
    port_ = http_->bind_to_port(bind, port) ? port : -1;
  if (port_ < 0) throw IoError("cannot bind " + bind + ":" + std::to_string(port));
  http_->listen_after_bind();
}

void Server::stop() {
  mgr_.close_all();
  if (http_) http_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace minsky::session
