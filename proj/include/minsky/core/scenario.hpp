#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "minsky/core/abm.hpp"
#include "minsky/core/accelerator.hpp"
#include "minsky/core/errors.hpp"
#include "minsky/core/network_accelerator.hpp"
#include "minsky/core/percolation.hpp"
#include "minsky/core/walras.hpp"

namespace minsky {

inline constexpr const char* kVersion = "0.3.1";
inline constexpr int kCsvSchemaVersion = 1;

using json = nlohmann::json;

struct ConfigIssue {
  std::string pointer;  // JSON pointer into the config document
  std::string message;
};

/// All problems found in a config document, not just the first.
class ConfigError : public ParameterError {
public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const { return issues_; }

private:
  std::vector<ConfigIssue> issues_;
};

json load_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

struct Analytics {
  double S = 1.0;
  double gamma = 1.0;
  double rho_C = 0.0;  // 0 = unknown
};

struct Scenario {
  json document;  // as given, with defaults filled in
  abm::SimConfig sim;
  int ensemble_runs = 0;
  bool ensemble_reseed = true;
  std::optional<Analytics> analytics;
  std::optional<double> hedge_margin;
  std::string bind = "127.0.0.1";
  int port = 8080;
};

/// Parses and validates a scenario document; relative edge-list paths are
/// resolved against base_dir.
Scenario parse_scenario(const json& doc, const std::string& base_dir = ".");
Scenario load_scenario(const std::string& path);

/// Network-family defaults for the analytics block: random regular and tree
/// graphs use rho_C = 1/(K-1), Erdos-Renyi 1/c, gamma = S = 1.
std::optional<Analytics> default_analytics(const perc::GeneratorSpec& net);

/// Combined-map parameters implied by a scenario, when analytics are known.
std::optional<netacc::CombinedParams> combined_params(const Scenario& sc);

// Flat parameter block shared by the fixed-point and sweep commands.
struct ModelParams {
  std::optional<double> i0, k, alpha, beta, mu, gamma, S, rho_C;
  std::optional<std::int64_t> n_total;
  walras::ReturnsMode returns = walras::ReturnsMode::decreasing;
};
ModelParams parse_model_params(const json& doc);
json to_json(const ModelParams& p);

// Sweep requests on the wire.
struct PhaseRequest {
  netacc::CombinedParams params;
  netacc::GridSpec grid;
};
/// {params: {k, alpha, beta, gamma, S, rho_C, n_total, i0?}, grid: {...}}; a
/// missing y range defaults to [i_safe/2, 2 i_0C] on the chosen axis.
PhaseRequest parse_phase_request(const json& doc);

struct ScalingRequest {
  perc::GeneratorSpec family;
  std::vector<double> rho;
  int runs = 2000;
  perc::SeedMode mode = perc::SeedMode::upstream;
  std::uint64_t seed = 0;
};
/// {network: {...}, rho: [..] | {min, max, count}, runs, seed_mode, seed}
ScalingRequest parse_scaling_request(const json& doc, const std::string& base_dir = ".");

/// Population used when a fixed-point query gives no n_total.
inline constexpr std::int64_t kDefaultTotal = 1'000'000'000;

/// Every fixed point, threshold and stability label the parameters admit.
/// The network block needs rho_C and alpha > 0; n0 adds trajectories and a phase label.
json fixed_points_report(const ModelParams& p, std::optional<double> n0 = std::nullopt,
                         int max_steps = 200);

// Interventions and policies on the wire.
abm::Intervention intervention_from_json(const json& j);
json to_json(const abm::Intervention& iv);
json to_json(const abm::LoggedIntervention& l);
abm::PolicySpec policy_from_json(const json& j, double default_alpha);
json to_json(const abm::PolicySpec& p);

json to_json(const walras::Trajectory& t);
json to_json(const netacc::FixedPointSet& f);
json to_json(const netacc::Thresholds& t);
json to_json(const perc::ScalingFit& f);
json to_json(const abm::TickDelta& d);
json to_json(const abm::EnsembleStats& e);

/// Snapshot for the session API and simulate summaries.
json snapshot_json(const Scenario& sc, const abm::SimState& s, bool include_firms = true);

/// FNV-1a over everything a tick or intervention can change.
std::uint64_t state_hash(const abm::SimState& s);

// CSV emitters. Column sets are fixed per kCsvSchemaVersion.
void write_trajectory_csv(std::ostream& os, const walras::Trajectory& t);
void write_series_csv(std::ostream& os, const abm::SimState& s);
void write_phase_csv(std::ostream& os, const netacc::PhaseGrid& g);
json phase_sidecar(const netacc::PhaseGrid& g);
void write_scaling_csv(std::ostream& os, const perc::ScalingFit& f);
void write_ensemble_csv(std::ostream& os, const abm::EnsembleStats& e);
void write_runs_csv(std::ostream& os, const abm::EnsembleStats& e);

/// Shortest round-trip decimal form; keeps CSV bytes stable across runs.
std::string fmt_double(double x);


}  // namespace minsky
