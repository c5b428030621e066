#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace minsky::perc {

using NodeId = std::int64_t;
using Edge = std::pair<NodeId, NodeId>;

enum class GeneratorKind : std::uint8_t { random_regular, erdos_renyi, tree, explicit_edges };
std::string_view to_string(GeneratorKind g);

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::random_regular;
  std::int64_t n = 0;         // random_regular, erdos_renyi, explicit (node count)
  int K = 0;                  // random_regular degree, tree branching
  double mean_degree = 0.0;   // erdos_renyi
  int depth = 0;              // tree
  std::vector<Edge> edges;    // explicit
  std::uint64_t seed = 0;

  static GeneratorSpec random_regular(std::int64_t n, int K, std::uint64_t seed);
  static GeneratorSpec erdos_renyi(std::int64_t n, double mean_degree, std::uint64_t seed);
  static GeneratorSpec tree(int K, int depth);
  static GeneratorSpec from_edges(std::int64_t n, std::vector<Edge> edges);
};

/// Undirected simple graph in compressed adjacency form.
class Network {
public:
  Network() = default;
  Network(std::int64_t n_nodes, std::span<const Edge> edges);  // validates

  std::int64_t n_nodes() const { return n_; }
  std::int64_t n_edges() const { return static_cast<std::int64_t>(nbrs_.size() / 2); }
  std::span<const NodeId> neighbors(NodeId u) const {
    return {nbrs_.data() + offsets_[u], nbrs_.data() + offsets_[u + 1]};
  }
  int degree(NodeId u) const { return static_cast<int>(offsets_[u + 1] - offsets_[u]); }
  bool has_edge(NodeId u, NodeId v) const;
  bool contains(NodeId u) const { return u >= 0 && u < n_; }
  /// Each edge once, u < v, sorted.
  std::vector<Edge> edges() const;

  const GeneratorSpec& spec() const { return spec_; }
  void set_spec(GeneratorSpec s) { spec_ = std::move(s); }

private:
  std::int64_t n_ = 0;
  std::vector<std::int64_t> offsets_{0};
  std::vector<NodeId> nbrs_;
  GeneratorSpec spec_;
};

Network build_network(const GeneratorSpec& spec);

/// Whitespace-separated "u v" pairs, 0-indexed, one per line. Blank lines and
/// lines starting with '#' are skipped.
std::vector<Edge> read_edge_list(const std::string& path);

struct AvalancheResult {
  std::vector<NodeId> failed;                // sorted
  std::vector<std::int64_t> per_step_counts; // [0] = seeds
  int steps = 0;
  std::int64_t size() const { return static_cast<std::int64_t>(failed.size()); }
};

/// Synchronous contagion: each tick, every susceptible non-immunized node with
/// a failed neighbour fails. Seeds fail at tick 0 regardless of susceptibility.
AvalancheResult run_avalanche(const Network& net, std::span<const NodeId> susceptible,
                              std::span<const NodeId> seeds, std::span<const NodeId> immunized = {});

class UnionFind {
public:
  explicit UnionFind(std::int64_t n);
  NodeId find(NodeId x);
  bool unite(NodeId a, NodeId b);
  std::int64_t size_of(NodeId x) { return size_[find(x)]; }

private:
  std::vector<NodeId> parent_;
  std::vector<std::int64_t> size_;
};

struct Census {
  std::vector<std::int64_t> sizes;  // descending
  std::int64_t largest = 0;
};

/// Connected components of the subgraph induced by the susceptible nodes.
Census cluster_census(const Network& net, std::span<const NodeId> susceptible);

/// Expected cumulative failures of the tree-like branching series with branching
/// factor (K-1) rho. t = nullopt means t -> infinity; returns +inf when the series
/// does not converge.
double branching_prediction(int K, double rho, std::optional<int> t);

/// min(N_pred, rho * n_total).
double finite_size_cap(double n_pred, double rho, std::int64_t n_total);

/// How a single-seed Monte Carlo avalanche starts. `upstream` blocks one random
/// neighbour of the seed, standing for the node that contaminated it, so every
/// failed node (seed included) has K-1 fresh neighbours on a regular graph.
/// `bare` exposes all K neighbours of the seed.
enum class SeedMode : std::uint8_t { upstream, bare };

/// Independent avalanches on one network: each run picks a uniform seed node
/// (the root on tree networks)
/// and draws node susceptibility with probability rho lazily, on first exposure.
/// Returns the final size of every run.
std::vector<std::int64_t> sample_avalanche_sizes(const Network& net, double rho, int runs,
                                                 std::uint64_t seed,
                                                 SeedMode mode = SeedMode::upstream);

struct SampleStats {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double cv = 0.0;        // sd / mean
  double std_error = 0.0;
};
SampleStats summarize(std::span<const std::int64_t> sizes);

struct ScalingPoint {
  double rho = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
  double residual = 0.0;  // ln(mean) - ln(fit), NaN when excluded from the fit
  bool used = false;
};

struct ScalingFit {
  bool ok = false;
  std::string message;
  double rho_c = 0.0;
  double gamma = 0.0;
  double S = 0.0;
  std::vector<ScalingPoint> points;
};

/// Fits mean avalanche size to S (1 - rho/rho_c)^-gamma by weighted least
/// squares in log space. rho_c is scanned then golden-section refined; the
/// final pass keeps only points with rho <= 0.95 rho_c.
ScalingFit fit_scaling(std::span<const double> rho, std::span<const double> mean,
                       std::span<const double> std_error);

ScalingFit estimate_scaling(const GeneratorSpec& family, std::span<const double> rho_grid,
                            int runs_per_point, std::uint64_t seed,
                            SeedMode mode = SeedMode::upstream);

}  // namespace minsky::perc
