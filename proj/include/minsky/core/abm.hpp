#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "minsky/core/econ.hpp"
#include "minsky/core/percolation.hpp"

namespace minsky::abm {

using perc::Edge;
using perc::NodeId;

/// procyclical: i0 N^|alpha|; counter_cyclical: i0 N^-|alpha|;
/// self_regulating: i0 max(N_tick, 1)^-|alpha| driven by the latest tick's
/// failures, so the rate falls while failures accelerate and climbs back when
/// they ebb; manual_override: constant rate.
enum class RateRule : std::uint8_t { procyclical, counter_cyclical, self_regulating, manual_override };
std::string_view to_string(RateRule r);

/// What N the rate rule reads (self_regulating always uses per_tick).
enum class RateDriver : std::uint8_t { cumulative, per_tick };
std::string_view to_string(RateDriver d);

struct PolicySpec {
  RateRule rule = RateRule::procyclical;
  double alpha = 0.0;
  double manual_rate = 0.0;
  std::optional<double> floor;
  void validate() const;
};

struct ImmunizeNodes { std::vector<NodeId> ids; };
struct GuaranteeEdges { std::vector<Edge> edges; };
struct SetRate { double rate = 0.0; };
struct SetPolicy { PolicySpec policy; };
using Intervention = std::variant<ImmunizeNodes, GuaranteeEdges, SetRate, SetPolicy>;
std::string_view kind_name(const Intervention& iv);

struct LoggedIntervention {
  std::int64_t tick = 0;  // state tick when applied; effective from tick + 1
  Intervention intervention;
};

struct SimConfig {
  perc::GeneratorSpec network;
  econ::ResilienceSpec resilience;  // n_total is taken from the network
  bool shuffle_ranks = true;        // rank mode: assign ranks to nodes by a seeded permutation
  double i0 = 0.0;
  PolicySpec policy;
  RateDriver driver = RateDriver::cumulative;
  std::vector<NodeId> seeds;
  std::int64_t random_seeds = 0;  // additional uniformly drawn seed firms
  std::vector<NodeId> immunized;
  std::vector<Edge> guaranteed_edges;
  std::int64_t ticks = 0;
  std::uint64_t seed = 0;
  std::vector<LoggedIntervention> scheduled;  // applied when the state reaches `tick`
};

struct SimState {
  std::int64_t tick = 0;
  std::shared_ptr<const perc::Network> network;
  econ::FirmTable firms;
  double i0 = 0.0;
  double i_current = 0.0;
  PolicySpec policy;
  RateDriver driver = RateDriver::cumulative;
  std::optional<double> pending_rate;  // one-tick override
  std::vector<Edge> guaranteed;        // sorted, u < v
  std::int64_t cumulative_failed = 0;
  std::vector<std::int64_t> per_tick_failures;  // [0] = seeds
  std::vector<std::int64_t> ponzi_series;       // currently ponzi (not failed) after each tick
  std::vector<double> rate_series;              // rate used at each tick, [0] = i0
  std::vector<LoggedIntervention> log;
  std::uint64_t seed = 0;

  bool is_guaranteed(NodeId u, NodeId v) const;
};

struct TickDelta {
  std::int64_t tick = 0;
  double i_current = 0.0;
  std::vector<NodeId> new_failures;
  std::vector<NodeId> new_ponzi;
  std::vector<NodeId> recovered;  // ponzi -> viable after a rate drop
  std::vector<LoggedIntervention> applied_interventions;  // logged since the previous tick
};

/// Builds network and firms, fails the seeds at tick 0, classifies at i0.
SimState init_scenario(const SimConfig& config);

/// One tick in place: rate update, reclassification, one synchronous
/// contagion sweep across non-guaranteed edges.
TickDelta advance(SimState& state);
SimState tick(SimState state);

/// Validates targets first; on error the state is untouched.
void apply_intervention(SimState& state, const Intervention& iv);

/// init + scheduled interventions + config.ticks ticks.
SimState run_scenario(const SimConfig& config);

/// Applies a logged intervention sequence to a fresh init.
SimState replay(const SimConfig& config, const std::vector<LoggedIntervention>& log,
                std::int64_t until_tick);

struct Bottleneck {
  bool fired = false;
  std::int64_t tick = -1;
  double value = 0.0;
};

/// Interior local minimum of the rolling-median-smoothed series that is
/// <= threshold and has strictly higher values somewhere on both sides.
Bottleneck find_bottleneck(const std::vector<double>& series, int window = 3,
                           double threshold = 2.0);

struct EnsembleStats {
  std::vector<std::int64_t> final_failures;
  std::vector<double> mean_per_tick;      // new failures
  std::vector<double> variance_per_tick;
  std::vector<double> mean_cumulative;
  std::vector<double> variance_cumulative;
  double mean_final = 0.0;
  double cv_final = 0.0;
  Bottleneck bottleneck;
};

/// Run r uses derive_seed(config.seed, r) for network and resiliences unless
/// reseed is false, in which case every run repeats the base configuration.
EnsembleStats run_ensemble(const SimConfig& config, int n_runs, bool reseed = true);

}  // namespace minsky::abm
