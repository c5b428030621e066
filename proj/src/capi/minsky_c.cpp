#include "minsky/minsky.h"

#include <cstdlib>
#include <cstring>
#include <sstream>
#include <string>

#include "minsky/core/scenario.hpp"
#include "minsky/core/session.hpp"

using minsky::json;

struct minsky_sim {
  minsky::session::SessionManager mgr;
  std::string id;
};

struct minsky_server {
  minsky::session::SessionManager mgr;
  minsky::session::Server server{mgr};
};

namespace {

thread_local std::string g_last_error;

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

int fail(int code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

// Runs fn and converts exceptions into status codes.
template <class F>
int guard(F&& fn) {
  g_last_error.clear();
  try {
    fn();
    return MINSKY_OK;
  } catch (const minsky::ConfigError& e) {
    return fail(MINSKY_ERR_CONFIG, e.what());
  } catch (const minsky::Error& e) {
    return fail(static_cast<int>(e.kind()), e.what());
  } catch (const json::exception& e) {
    return fail(MINSKY_ERR_CONFIG, std::string("invalid JSON: ") + e.what());
  } catch (const std::bad_alloc&) {
    return fail(MINSKY_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MINSKY_ERR_INTERNAL, e.what());
  }
}

json parse(const char* text) {
  if (!text) throw minsky::ParameterError("null JSON argument");
  return json::parse(text);
}

std::string dir_or_dot(const char* d) { return d && *d ? d : "."; }

template <class W, class T>
std::string render(W writer, const T& value) {
  std::ostringstream os;
  writer(os, value);
  return os.str();
}

}  // namespace

extern "C" {

const char* minsky_version(void) { return minsky::kVersion; }

const char* minsky_last_error(void) { return g_last_error.c_str(); }

void minsky_string_free(char* s) { std::free(s); }

int minsky_fixed_points(const char* params_json, double n0, int max_steps, char** report_json) {
  return guard([&] {
    const auto p = minsky::parse_model_params(parse(params_json));
    std::optional<double> start;
    if (n0 > 0.0) start = n0;
    const auto report = minsky::fixed_points_report(p, start, max_steps > 0 ? max_steps : 200);
    *report_json = dup(report.dump(2));
  });
}

int minsky_phase_sweep(const char* request_json, char** grid_csv, char** sidecar_json) {
  return guard([&] {
    const auto req = minsky::parse_phase_request(parse(request_json));
    const auto grid = minsky::netacc::phase_diagram(req.params, req.grid);
    const auto csv = render([](std::ostream& os, const auto& g) { minsky::write_phase_csv(os, g); }, grid);
    const auto side = minsky::phase_sidecar(grid).dump(2);
    *grid_csv = dup(csv);
    *sidecar_json = dup(side);
  });
}

int minsky_scaling_sweep(const char* request_json, const char* base_dir, uint64_t seed, char** points_csv,
                         char** fit_json) {
  return guard([&] {
    auto req = minsky::parse_scaling_request(parse(request_json), dir_or_dot(base_dir));
    req.seed = seed;
    const auto fit = minsky::perc::estimate_scaling(req.family, req.rho, req.runs, req.seed, req.mode);
    const auto csv = render([](std::ostream& os, const auto& f) { minsky::write_scaling_csv(os, f); }, fit);
    json j = minsky::to_json(fit);
    j["runs_per_point"] = req.runs;
    j["seed"] = req.seed;
    j["csv_schema_version"] = minsky::kCsvSchemaVersion;
    *points_csv = dup(csv);
    *fit_json = dup(j.dump(2));
  });
}

int minsky_simulate(const char* scenario_json, const char* base_dir, char** series_csv, char** summary_json) {
  return guard([&] {
    const auto sc = minsky::parse_scenario(parse(scenario_json), dir_or_dot(base_dir));
    const auto state = minsky::abm::run_scenario(sc.sim);
    const auto csv = render([](std::ostream& os, const auto& s) { minsky::write_series_csv(os, s); }, state);
    json summary = minsky::snapshot_json(sc, state, false);
    summary["csv_schema_version"] = minsky::kCsvSchemaVersion;
    *series_csv = dup(csv);
    *summary_json = dup(summary.dump(2));
  });
}

int minsky_ensemble(const char* scenario_json, const char* base_dir, int n_runs, char** stats_csv,
                    char** runs_csv, char** summary_json) {
  return guard([&] {
    const auto sc = minsky::parse_scenario(parse(scenario_json), dir_or_dot(base_dir));
    const int runs = n_runs > 0 ? n_runs : sc.ensemble_runs;
    if (runs < 2) throw minsky::ConfigError(std::vector<minsky::ConfigIssue>{{"/ensemble/runs", "need at least 2 runs"}});
    const auto stats = minsky::abm::run_ensemble(sc.sim, runs, sc.ensemble_reseed);
    const auto a = render([](std::ostream& os, const auto& e) { minsky::write_ensemble_csv(os, e); }, stats);
    const auto b = render([](std::ostream& os, const auto& e) { minsky::write_runs_csv(os, e); }, stats);
    json summary = minsky::to_json(stats);
    summary["ticks"] = sc.sim.ticks;
    summary["seed"] = sc.sim.seed;
    summary["reseed"] = sc.ensemble_reseed;
    summary["csv_schema_version"] = minsky::kCsvSchemaVersion;
    *stats_csv = dup(a);
    *runs_csv = dup(b);
    *summary_json = dup(summary.dump(2));
  });
}

int minsky_sim_create(const char* scenario_json, const char* base_dir, minsky_sim** out) {
  return guard([&] {
    auto sim = std::make_unique<minsky_sim>();
    sim->id = sim->mgr.create(parse(scenario_json), dir_or_dot(base_dir)).id;
    *out = sim.release();
  });
}

int minsky_sim_tick(minsky_sim* sim, int64_t n_ticks, char** deltas_json) {
  if (!sim) return fail(MINSKY_ERR_CONFIG, "null simulation handle");
  return guard([&] { *deltas_json = dup(sim->mgr.advance(sim->id, n_ticks).dump()); });
}

int minsky_sim_intervene(minsky_sim* sim, const char* intervention_json, char** ack_json) {
  if (!sim) return fail(MINSKY_ERR_CONFIG, "null simulation handle");
  return guard([&] { *ack_json = dup(sim->mgr.intervene(sim->id, parse(intervention_json)).dump()); });
}

int minsky_sim_preview(minsky_sim* sim, const char* intervention_json, char** preview_json) {
  if (!sim) return fail(MINSKY_ERR_CONFIG, "null simulation handle");
  return guard([&] {
    std::optional<json> iv;
    if (intervention_json && *intervention_json) iv = parse(intervention_json);
    *preview_json = dup(sim->mgr.preview(sim->id, iv).dump());
  });
}

int minsky_sim_snapshot(minsky_sim* sim, int include_firms, char** snapshot_json) {
  if (!sim) return fail(MINSKY_ERR_CONFIG, "null simulation handle");
  return guard([&] { *snapshot_json = dup(sim->mgr.snapshot(sim->id, include_firms != 0).dump()); });
}

void minsky_sim_free(minsky_sim* sim) { delete sim; }

int minsky_server_create(minsky_server** out) {
  return guard([&] { *out = new minsky_server(); });
}

int minsky_server_listen(minsky_server* server, const char* bind, int port, int* bound_port) {
  if (!server) return fail(MINSKY_ERR_CONFIG, "null server handle");
  return guard([&] {
    const int p = server->server.start(bind ? bind : "127.0.0.1", port);
    if (bound_port) *bound_port = p;
  });
}

int minsky_server_run(minsky_server* server, const char* bind, int port) {
  if (!server) return fail(MINSKY_ERR_CONFIG, "null server handle");
  return guard([&] { server->server.run(bind ? bind : "127.0.0.1", port); });
}

int minsky_server_stop(minsky_server* server) {
  if (!server) return fail(MINSKY_ERR_CONFIG, "null server handle");
  return guard([&] { server->server.stop(); });
}

void minsky_server_free(minsky_server* server) { delete server; }

}  // extern "C"
