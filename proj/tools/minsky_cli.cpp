// Command-line driver. Talks to the engine only through the C interface.
#include <csignal>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "minsky/minsky.h"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

enum Level { kDebug = 0, kInfo, kWarn, kError, kOff };
Level g_level = kWarn;

void init_log() {
  const char* v = std::getenv("MINSKY_LOG");
  if (!v) return;
  const std::string s = v;
  if (s == "debug") g_level = kDebug;
  else if (s == "info") g_level = kInfo;
  else if (s == "warn") g_level = kWarn;
  else if (s == "error") g_level = kError;
  else if (s == "off") g_level = kOff;
}

void log(Level lv, const std::string& msg) {
  static const char* names[] = {"debug", "info", "warn", "error"};
  if (lv >= g_level && lv != kOff) std::cerr << "[" << names[lv] << "] " << msg << "\n";
}

// A failed step: status code plus message, turned into the exit code in main.
struct Exit {
  int code;
  std::string message;
};

// Owns a string allocated by the library.
struct Owned {
  char* p = nullptr;
  ~Owned() { minsky_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

void check(int status) {
  if (status != MINSKY_OK) throw Exit{status, minsky_last_error()};
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Exit{MINSKY_ERR_IO, "cannot read " + path};
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string base_dir_of(const std::string& path) {
  const auto d = fs::path(path).parent_path().string();
  return d.empty() ? "." : d;
}

struct Loaded {
  json config = json::object();
  std::optional<std::uint64_t> seed;
};

// A config file, or a manifest from an earlier run (its config and seed are reused).
Loaded load_config(const std::string& path) {
  Loaded out;
  if (path.empty()) return out;
  try {
    out.config = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw Exit{MINSKY_ERR_CONFIG, path + ": " + e.what()};
  }
  if (out.config.is_object() && out.config.contains("manifest_version")) {
    if (out.config.contains("seed") && out.config["seed"].is_number_unsigned())
      out.seed = out.config["seed"].get<std::uint64_t>();
    json inner = out.config.value("config", json::object());
    out.config = inner;
  }
  if (!out.config.is_object()) throw Exit{MINSKY_ERR_CONFIG, path + ": config must be a JSON object"};
  return out;
}

class Outputs {
public:
  explicit Outputs(std::string dir) : dir_(std::move(dir)) {}

  void prepare() {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Exit{MINSKY_ERR_IO, "cannot create " + dir_ + ": " + ec.message()};
  }

  void write(const std::string& name, const std::string& text) {
    const auto path = (fs::path(dir_) / name).string();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Exit{MINSKY_ERR_IO, "cannot write " + path};
    out << text;
    out.flush();
    if (!out) throw Exit{MINSKY_ERR_IO, "write failed: " + path};
    written_.push_back(path);
    log(kInfo, "wrote " + path);
  }

  void manifest(const std::string& command, const json& config, std::uint64_t seed,
                const std::vector<std::string>& argv) {
    auto outputs = written_;
    outputs.push_back((fs::path(dir_) / "manifest.json").string());
    json m = {{"manifest_version", 1},
              {"tool", "minsky"},
              {"version", minsky_version()},
              {"command", command},
              {"config", config},
              {"seed", seed},
              {"outputs", outputs},
              {"argv", argv}};
    write("manifest.json", m.dump(2) + "\n");
  }

private:
  std::string dir_;
  std::vector<std::string> written_;
};

template <class T>
void put(json& doc, const json::json_pointer& ptr, const std::optional<T>& v) {
  if (v) doc[ptr] = *v;
}

// Flat "quantity,value" rendering of a fixed-point report.
void flatten(const json& j, const std::string& prefix, std::ostream& os) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) {
      if (k == "trajectory" || k == "points") continue;
      flatten(v, prefix.empty() ? k : prefix + "." + k, os);
    }
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "." + std::to_string(i), os);
  } else {
    os << prefix << "," << (j.is_string() ? j.get<std::string>() : j.dump()) << "\n";
  }
}

// Trajectories from the report as "t,N,i" rows.
std::string trajectory_csv(const json& traj) {
  std::ostringstream os;
  os << "t,N,i\n";
  for (const auto& s : traj.at("steps")) os << s.at("t").dump() << "," << s.at("N").dump() << "," << s.at("i").dump() << "\n";
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  init_log();
  const std::vector<std::string> args(argv, argv + argc);

  CLI::App app{"Minsky financial-instability engine"};
  app.set_version_flag("--version", std::string(minsky_version()));
  app.require_subcommand(1);

  // shared flags
  std::string config_path, out_dir, format = "json";
  std::optional<std::uint64_t> seed;

  // fixed-points
  auto* fp = app.add_subcommand("fixed-points", "fixed points, thresholds, regime and stability");
  std::optional<double> i0, k, alpha, beta, mu, gamma, S, rho_C, n0;
  std::optional<std::int64_t> n_total;
  std::optional<std::string> returns;
  int steps = 200;
  fp->add_option("--config", config_path, "JSON parameter file");
  fp->add_option("--out", out_dir, "also write report and manifest here");
  fp->add_option("--format", format, "stdout format")->check(CLI::IsMember({"json", "csv"}));
  fp->add_option("--i0", i0);
  fp->add_option("--k", k);
  fp->add_option("--alpha", alpha);
  fp->add_option("--beta", beta);
  fp->add_option("--mu", mu);
  fp->add_option("--gamma", gamma);
  fp->add_option("--S", S);
  fp->add_option("--rho-C", rho_C);
  fp->add_option("--n-total", n_total);
  fp->add_option("--returns", returns)->check(CLI::IsMember({"decreasing", "increasing"}));
  fp->add_option("--n0", n0, "start a trajectory here");
  fp->add_option("--steps", steps, "trajectory length");

  // sweep
  auto* sw = app.add_subcommand("sweep", "phase diagram or percolation scaling sweep");
  sw->require_subcommand(1);
  auto* phase = sw->add_subcommand("phase", "phase-label grid over (N0, i0) or (N0, rho0)");
  auto* scaling = sw->add_subcommand("scaling", "Monte Carlo avalanche sizes and threshold fit");
  std::optional<std::string> axis, net_type, seed_mode;
  std::optional<double> n0_min, n0_max, y_min, y_max, mean_degree, rho_min, rho_max;
  std::optional<std::int64_t> n0_count, y_count, n_nodes, K, depth, rho_count, runs;
  for (auto* sc : {phase, scaling}) {
    sc->add_option("--config", config_path, "JSON request file");
    sc->add_option("--out", out_dir, "output directory")->default_str(".");
    sc->add_option("--format", format, "stdout format")->check(CLI::IsMember({"json", "csv"}));
  }
  phase->add_option("--i0", i0);
  phase->add_option("--k", k);
  phase->add_option("--alpha", alpha);
  phase->add_option("--beta", beta);
  phase->add_option("--gamma", gamma);
  phase->add_option("--S", S);
  phase->add_option("--rho-C", rho_C);
  phase->add_option("--n-total", n_total);
  phase->add_option("--axis", axis)->check(CLI::IsMember({"i0", "rho0"}));
  phase->add_option("--n0-min", n0_min);
  phase->add_option("--n0-max", n0_max);
  phase->add_option("--n0-count", n0_count);
  phase->add_option("--y-min", y_min);
  phase->add_option("--y-max", y_max);
  phase->add_option("--y-count", y_count);
  scaling->add_option("--seed", seed);
  scaling->add_option("--network-type", net_type)->check(CLI::IsMember({"random_regular", "erdos_renyi", "tree", "explicit"}));
  scaling->add_option("--n", n_nodes);
  scaling->add_option("--K", K);
  scaling->add_option("--mean-degree", mean_degree);
  scaling->add_option("--depth", depth);
  scaling->add_option("--rho-min", rho_min);
  scaling->add_option("--rho-max", rho_max);
  scaling->add_option("--rho-count", rho_count);
  scaling->add_option("--runs", runs);
  scaling->add_option("--seed-mode", seed_mode)->check(CLI::IsMember({"upstream", "bare"}));

  // simulate
  auto* sim = app.add_subcommand("simulate", "agent-based run, optionally an ensemble");
  std::optional<std::int64_t> ticks, ensemble;
  std::optional<double> sim_i0, sim_alpha;
  sim->add_option("--config", config_path, "scenario file")->required();
  sim->add_option("--out", out_dir, "output directory")->default_str(".");
  sim->add_option("--format", format, "stdout format")->check(CLI::IsMember({"json", "csv"}));
  sim->add_option("--seed", seed);
  sim->add_option("--ticks", ticks);
  sim->add_option("--ensemble", ensemble, "number of runs");
  sim->add_option("--i0", sim_i0);
  sim->add_option("--alpha", sim_alpha);

  // serve
  auto* serve = app.add_subcommand("serve", "HTTP session service");
  std::optional<std::string> bind;
  std::optional<int> port;
  serve->add_option("--config", config_path, "scenario file with a server block");
  serve->add_option("--bind", bind);
  serve->add_option("--port", port);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return MINSKY_ERR_CONFIG;
  }
  if (out_dir.empty() && !fp->parsed()) out_dir = ".";

  try {
    if (fp->parsed()) {
      auto loaded = load_config(config_path);
      json& doc = loaded.config;
      put(doc, "/i0"_json_pointer, i0);
      put(doc, "/k"_json_pointer, k);
      put(doc, "/alpha"_json_pointer, alpha);
      put(doc, "/beta"_json_pointer, beta);
      put(doc, "/mu"_json_pointer, mu);
      put(doc, "/gamma"_json_pointer, gamma);
      put(doc, "/S"_json_pointer, S);
      put(doc, "/rho_C"_json_pointer, rho_C);
      put(doc, "/n_total"_json_pointer, n_total);
      put(doc, "/returns"_json_pointer, returns);
      Owned report;
      check(minsky_fixed_points(doc.dump().c_str(), n0.value_or(0.0), steps, &report.p));
      const json r = json::parse(report.str());
      std::ostringstream table;
      table << "quantity,value\n";
      flatten(r, "", table);
      std::cout << (format == "csv" ? table.str() : r.dump(2) + "\n");
      if (!out_dir.empty()) {
        Outputs out(out_dir);
        out.prepare();
        out.write("fixed_points.json", r.dump(2) + "\n");
        out.write("fixed_points.csv", table.str());
        if (r.contains("trajectory")) out.write("trajectory.csv", trajectory_csv(r["trajectory"]));
        if (r.contains("network") && r["network"].contains("trajectory"))
          out.write("combined_trajectory.csv", trajectory_csv(r["network"]["trajectory"]));
        json cfg = doc;
        if (n0) cfg["n0"] = *n0;
        cfg["steps"] = steps;
        out.manifest("fixed-points", cfg, 0, args);
      }
      return 0;
    }

    if (phase->parsed()) {
      auto loaded = load_config(config_path);
      json& doc = loaded.config;
      put(doc, "/params/i0"_json_pointer, i0);
      put(doc, "/params/k"_json_pointer, k);
      put(doc, "/params/alpha"_json_pointer, alpha);
      put(doc, "/params/beta"_json_pointer, beta);
      put(doc, "/params/gamma"_json_pointer, gamma);
      put(doc, "/params/S"_json_pointer, S);
      put(doc, "/params/rho_C"_json_pointer, rho_C);
      put(doc, "/params/n_total"_json_pointer, n_total);
      put(doc, "/grid/axis"_json_pointer, axis);
      put(doc, "/grid/n0_min"_json_pointer, n0_min);
      put(doc, "/grid/n0_max"_json_pointer, n0_max);
      put(doc, "/grid/n0_count"_json_pointer, n0_count);
      put(doc, "/grid/y_min"_json_pointer, y_min);
      put(doc, "/grid/y_max"_json_pointer, y_max);
      put(doc, "/grid/y_count"_json_pointer, y_count);
      Outputs out(out_dir);
      out.prepare();
      Owned csv, side;
      check(minsky_phase_sweep(doc.dump().c_str(), &csv.p, &side.p));
      out.write("phase.csv", csv.str());
      out.write("phase_boundaries.json", side.str() + "\n");
      out.manifest("sweep phase", doc, 0, args);
      std::cout << (format == "csv" ? csv.str() : side.str() + "\n");
      return 0;
    }

    if (scaling->parsed()) {
      auto loaded = load_config(config_path);
      json& doc = loaded.config;
      put(doc, "/network/type"_json_pointer, net_type);
      put(doc, "/network/n"_json_pointer, n_nodes);
      put(doc, "/network/K"_json_pointer, K);
      put(doc, "/network/mean_degree"_json_pointer, mean_degree);
      put(doc, "/network/depth"_json_pointer, depth);
      if (rho_min || rho_max || rho_count) {
        if (doc.contains("rho") && !doc["rho"].is_object()) doc.erase("rho");
        put(doc, "/rho/min"_json_pointer, rho_min);
        put(doc, "/rho/max"_json_pointer, rho_max);
        put(doc, "/rho/count"_json_pointer, rho_count);
      }
      put(doc, "/runs"_json_pointer, runs);
      put(doc, "/seed_mode"_json_pointer, seed_mode);
      std::uint64_t s = 0;
      if (seed) s = *seed;
      else if (loaded.seed) s = *loaded.seed;
      else if (doc.contains("seed") && doc["seed"].is_number_unsigned()) s = doc["seed"].get<std::uint64_t>();
      doc["seed"] = s;
      Outputs out(out_dir);
      out.prepare();
      Owned csv, fit;
      check(minsky_scaling_sweep(doc.dump().c_str(), base_dir_of(config_path).c_str(), s, &csv.p, &fit.p));
      out.write("scaling.csv", csv.str());
      out.write("scaling_fit.json", fit.str() + "\n");
      out.manifest("sweep scaling", doc, s, args);
      std::cout << (format == "csv" ? csv.str() : fit.str() + "\n");
      const json f = json::parse(fit.str());
      if (!f.value("ok", false)) log(kWarn, "scaling fit failed: " + f.value("message", std::string()));
      return 0;
    }

    if (sim->parsed()) {
      auto loaded = load_config(config_path);
      json& doc = loaded.config;
      if (seed) doc["seed"] = *seed;
      else if (loaded.seed && !doc.contains("seed")) doc["seed"] = *loaded.seed;
      put(doc, "/ticks"_json_pointer, ticks);
      put(doc, "/i0"_json_pointer, sim_i0);
      put(doc, "/alpha"_json_pointer, sim_alpha);
      if (ensemble) doc["/ensemble/runs"_json_pointer] = *ensemble;
      const std::uint64_t s = doc.contains("seed") && doc["seed"].is_number_unsigned() ? doc["seed"].get<std::uint64_t>() : 0;
      const std::string base = base_dir_of(config_path);
      Outputs out(out_dir);
      out.prepare();
      Owned series, summary;
      check(minsky_simulate(doc.dump().c_str(), base.c_str(), &series.p, &summary.p));
      out.write("series.csv", series.str());
      out.write("summary.json", summary.str() + "\n");
      if (doc.contains("ensemble")) {
        Owned stats, per_run, esum;
        check(minsky_ensemble(doc.dump().c_str(), base.c_str(), 0, &stats.p, &per_run.p, &esum.p));
        out.write("ensemble.csv", stats.str());
        out.write("runs.csv", per_run.str());
        out.write("ensemble.json", esum.str() + "\n");
        log(kInfo, "ensemble done");
      }
      out.manifest("simulate", doc, s, args);
      std::cout << (format == "csv" ? series.str() : summary.str() + "\n");
      return 0;
    }

    if (serve->parsed()) {
      auto loaded = load_config(config_path);
      std::string b = "127.0.0.1";
      int p = 8080;
      if (loaded.config.contains("server")) {
        b = loaded.config["server"].value("bind", b);
        p = loaded.config["server"].value("port", p);
      }
      if (bind) b = *bind;
      if (port) p = *port;

      // Signals are taken synchronously so shutdown runs on this thread.
      sigset_t set;
      sigemptyset(&set);
      sigaddset(&set, SIGINT);
      sigaddset(&set, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &set, nullptr);

      minsky_server* srv = nullptr;
      check(minsky_server_create(&srv));
      int bound = 0;
      const int st = minsky_server_listen(srv, b.c_str(), p, &bound);
      if (st != MINSKY_OK) {
        const std::string msg = minsky_last_error();
        minsky_server_free(srv);
        throw Exit{st, msg};
      }
      std::cout << "listening on http://" << b << ":" << bound << "/api/v1" << std::endl;
      int sig = 0;
      sigwait(&set, &sig);
      log(kInfo, "signal " + std::to_string(sig) + ", shutting down");
      minsky_server_stop(srv);
      minsky_server_free(srv);
      return 0;
    }
  } catch (const Exit& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.code == MINSKY_ERR_NOT_FOUND ? MINSKY_ERR_CONFIG : e.code;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return MINSKY_ERR_CONFIG;
  }
  return 0;
}
