#include "minsky/core/percolation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "minsky/core/errors.hpp"
#include "minsky/core/rng.hpp"

namespace minsky::perc {

std::string_view to_string(GeneratorKind g) {
  switch (g) {
    case GeneratorKind::random_regular: return "random_regular";
    case GeneratorKind::erdos_renyi: return "erdos_renyi";
    case GeneratorKind::tree: return "tree";
    case GeneratorKind::explicit_edges: return "explicit";
  }
  return "?";
}

GeneratorSpec GeneratorSpec::random_regular(std::int64_t n, int K, std::uint64_t seed) {
  GeneratorSpec s;
  s.kind = GeneratorKind::random_regular;
  s.n = n;
  s.K = K;
  s.seed = seed;
  return s;
}

GeneratorSpec GeneratorSpec::erdos_renyi(std::int64_t n, double mean_degree, std::uint64_t seed) {
  GeneratorSpec s;
  s.kind = GeneratorKind::erdos_renyi;
  s.n = n;
  s.mean_degree = mean_degree;
  s.seed = seed;
  return s;
}

GeneratorSpec GeneratorSpec::tree(int K, int depth) {
  GeneratorSpec s;
  s.kind = GeneratorKind::tree;
  s.K = K;
  s.depth = depth;
  return s;
}

GeneratorSpec GeneratorSpec::from_edges(std::int64_t n, std::vector<Edge> edges) {
  GeneratorSpec s;
  s.kind = GeneratorKind::explicit_edges;
  s.n = n;
  s.edges = std::move(edges);
  return s;
}

Network::Network(std::int64_t n_nodes, std::span<const Edge> edges) : n_(n_nodes) {
  if (n_nodes < 0) throw ParameterError("network: node count must be >= 0");
  std::vector<Edge> norm;
  norm.reserve(edges.size());
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || u >= n_nodes || v >= n_nodes)
      throw ParameterError("network: edge (" + std::to_string(u) + ", " + std::to_string(v) +
                           ") references a missing node");
    if (u == v) throw ParameterError("network: self-loop at node " + std::to_string(u));
    norm.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(norm.begin(), norm.end());
  auto dup = std::adjacent_find(norm.begin(), norm.end());
  if (dup != norm.end())
    throw ParameterError("network: duplicate edge (" + std::to_string(dup->first) + ", " +
                         std::to_string(dup->second) + ")");

  offsets_.assign(static_cast<std::size_t>(n_nodes) + 1, 0);
  for (auto [u, v] : norm) {
    ++offsets_[u + 1];
    ++offsets_[v + 1];
  }
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
  nbrs_.resize(norm.size() * 2);
  std::vector<std::int64_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (auto [u, v] : norm) {
    nbrs_[fill[u]++] = v;
    nbrs_[fill[v]++] = u;
  }
  for (std::int64_t u = 0; u < n_nodes; ++u)
    std::sort(nbrs_.begin() + offsets_[u], nbrs_.begin() + offsets_[u + 1]);
}

bool Network::has_edge(NodeId u, NodeId v) const {
  if (!contains(u) || !contains(v)) return false;
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

std::vector<Edge> Network::edges() const {
  std::vector<Edge> out;
  out.reserve(static_cast<std::size_t>(n_edges()));
  for (NodeId u = 0; u < n_; ++u)
    for (NodeId v : neighbors(u))
      if (u < v) out.emplace_back(u, v);
  return out;
}

namespace {

// Pairing model with on-the-fly rejection of loops and multi-edges; restarts
// when the remaining stubs cannot be matched.
std::vector<Edge> random_regular_edges(std::int64_t n, int K, Rng& rng) {
  if (K < 0 || n < 1) throw ParameterError("random_regular: need n >= 1 and K >= 0");
  if (K >= n) throw ParameterError("random_regular: K must be < n");
  if ((n * K) % 2 != 0) throw ParameterError("random_regular: n*K must be even");

  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<NodeId> stubs;
    stubs.reserve(static_cast<std::size_t>(n * K));
    for (NodeId u = 0; u < n; ++u)
      for (int j = 0; j < K; ++j) stubs.push_back(u);
    std::vector<std::vector<NodeId>> adj(static_cast<std::size_t>(n));
    std::vector<Edge> edges;
    edges.reserve(stubs.size() / 2);

    auto ok_pair = [&](NodeId u, NodeId v) {
      if (u == v) return false;
      const auto& a = adj[u];
      return std::find(a.begin(), a.end(), v) == a.end();
    };
    auto take = [&](std::size_t a, std::size_t b) {
      const NodeId u = stubs[a], v = stubs[b];
      adj[u].push_back(v);
      adj[v].push_back(u);
      edges.emplace_back(u, v);
      if (a < b) std::swap(a, b);
      stubs[a] = stubs.back();
      stubs.pop_back();
      stubs[b] = stubs.back();
      stubs.pop_back();
    };

    bool stuck = false;
    while (!stubs.empty()) {
      bool found = false;
      for (int tries = 0; tries < 64 && !found; ++tries) {
        const auto m = stubs.size();
        std::size_t a = rng.below(m), b = rng.below(m);
        if (a == b) continue;
        if (ok_pair(stubs[a], stubs[b])) {
          take(a, b);
          found = true;
        }
      }
      if (found) continue;
      // Few stubs left: enumerate the admissible pairs and pick one.
      std::vector<std::pair<std::size_t, std::size_t>> admissible;
      for (std::size_t a = 0; a < stubs.size(); ++a)
        for (std::size_t b = a + 1; b < stubs.size(); ++b)
          if (ok_pair(stubs[a], stubs[b])) admissible.emplace_back(a, b);
      if (admissible.empty()) {
        stuck = true;
        break;
      }
      auto [a, b] = admissible[rng.below(admissible.size())];
      take(a, b);
    }
    if (!stuck) return edges;
  }
  throw ParameterError("random_regular: could not realize the degree sequence");
}

// Batagelj & Brandes geometric skipping for G(n, p).
std::vector<Edge> erdos_renyi_edges(std::int64_t n, double c, Rng& rng) {
  if (n < 1) throw ParameterError("erdos_renyi: need n >= 1");
  if (!(c >= 0.0) || !std::isfinite(c)) throw ParameterError("erdos_renyi: mean degree must be >= 0");
  std::vector<Edge> edges;
  if (n < 2 || c == 0.0) return edges;
  const double p = c / static_cast<double>(n - 1);
  if (p >= 1.0) {
    for (NodeId v = 1; v < n; ++v)
      for (NodeId w = 0; w < v; ++w) edges.emplace_back(v, w);
    return edges;
  }
  const double lp = std::log1p(-p);
  std::int64_t v = 1, w = -1;
  while (v < n) {
    const double r = rng.uniform();
    w += 1 + static_cast<std::int64_t>(std::floor(std::log1p(-r) / lp));
    while (w >= v && v < n) {
      w -= v;
      ++v;
    }
    if (v < n) edges.emplace_back(v, w);
  }
  return edges;
}

std::pair<std::int64_t, std::vector<Edge>> tree_edges(int K, int depth) {
  if (K < 2) throw ParameterError("tree: K must be >= 2");
  if (depth < 0) throw ParameterError("tree: depth must be >= 0");
  std::vector<Edge> edges;
  std::vector<NodeId> level{0};
  NodeId next = 1;
  for (int d = 0; d < depth; ++d) {
    std::vector<NodeId> children;
    const int fan = d == 0 ? K : K - 1;
    for (NodeId parent : level)
      for (int j = 0; j < fan; ++j) {
        edges.emplace_back(parent, next);
        children.push_back(next++);
      }
    level = std::move(children);
    if (next > (std::int64_t{1} << 40)) throw ParameterError("tree: too many nodes");
  }
  return {next, std::move(edges)};
}

}  // namespace

Network build_network(const GeneratorSpec& spec) {
  Network net;
  switch (spec.kind) {
    case GeneratorKind::random_regular: {
      Rng rng(spec.seed);
      auto e = random_regular_edges(spec.n, spec.K, rng);
      net = Network(spec.n, e);
      break;
    }
    case GeneratorKind::erdos_renyi: {
      Rng rng(spec.seed);
      auto e = erdos_renyi_edges(spec.n, spec.mean_degree, rng);
      net = Network(spec.n, e);
      break;
    }
    case GeneratorKind::tree: {
      auto [n, e] = tree_edges(spec.K, spec.depth);
      net = Network(n, e);
      break;
    }
    case GeneratorKind::explicit_edges:
      net = Network(spec.n, spec.edges);
      break;
  }
  GeneratorSpec stored = spec;
  if (spec.kind == GeneratorKind::tree) stored.n = net.n_nodes();
  net.set_spec(std::move(stored));
  return net;
}

std::vector<Edge> read_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open edge list: " + path);
  std::vector<Edge> edges;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    NodeId u = 0, v = 0;
    std::string extra;
    if (!(ls >> u >> v) || (ls >> extra))
      throw ParameterError(path + ":" + std::to_string(lineno) + ": expected 'u v'");
    edges.emplace_back(u, v);
  }
  return edges;
}

AvalancheResult run_avalanche(const Network& net, std::span<const NodeId> susceptible,
                              std::span<const NodeId> seeds, std::span<const NodeId> immunized) {
  const auto n = static_cast<std::size_t>(net.n_nodes());
  // 1 susceptible, 2 immune, 4 failed
  std::vector<std::uint8_t> flag(n, 0);
  auto check = [&](NodeId u) {
    if (!net.contains(u)) throw ParameterError("avalanche: node " + std::to_string(u) + " out of range");
  };
  for (NodeId u : susceptible) check(u), flag[u] |= 1;
  for (NodeId u : immunized) check(u), flag[u] |= 2;

  AvalancheResult res;
  std::vector<NodeId> frontier;
  for (NodeId u : seeds) {
    check(u);
    if (flag[u] & 6) continue;
    flag[u] |= 4;
    frontier.push_back(u);
    res.failed.push_back(u);
  }
  res.per_step_counts.push_back(static_cast<std::int64_t>(frontier.size()));

  std::vector<NodeId> next;
  while (!frontier.empty()) {
    next.clear();
    for (NodeId u : frontier)
      for (NodeId v : net.neighbors(u))
        if ((flag[v] & 7) == 1) {
          flag[v] |= 4;
          next.push_back(v);
        }
    if (next.empty()) break;
    ++res.steps;
    res.per_step_counts.push_back(static_cast<std::int64_t>(next.size()));
    res.failed.insert(res.failed.end(), next.begin(), next.end());
    frontier.swap(next);
  }
  std::sort(res.failed.begin(), res.failed.end());
  return res;
}

UnionFind::UnionFind(std::int64_t n)
    : parent_(static_cast<std::size_t>(n)), size_(static_cast<std::size_t>(n), 1) {
  std::iota(parent_.begin(), parent_.end(), NodeId{0});
}

NodeId UnionFind::find(NodeId x) {
  while (parent_[x] != x) {
    parent_[x] = parent_[parent_[x]];
    x = parent_[x];
  }
  return x;
}

bool UnionFind::unite(NodeId a, NodeId b) {
  a = find(a);
  b = find(b);
  if (a == b) return false;
  if (size_[a] < size_[b]) std::swap(a, b);
  parent_[b] = a;
  size_[a] += size_[b];
  return true;
}

Census cluster_census(const Network& net, std::span<const NodeId> susceptible) {
  std::vector<std::uint8_t> in(static_cast<std::size_t>(net.n_nodes()), 0);
  for (NodeId u : susceptible) {
    if (!net.contains(u)) throw ParameterError("census: node " + std::to_string(u) + " out of range");
    in[u] = 1;
  }
  UnionFind uf(net.n_nodes());
  for (NodeId u = 0; u < net.n_nodes(); ++u) {
    if (!in[u]) continue;
    for (NodeId v : net.neighbors(u))
      if (v > u && in[v]) uf.unite(u, v);
  }
  Census c;
  for (NodeId u = 0; u < net.n_nodes(); ++u)
    if (in[u] && uf.find(u) == u) c.sizes.push_back(uf.size_of(u));
  std::sort(c.sizes.begin(), c.sizes.end(), std::greater<>());
  c.largest = c.sizes.empty() ? 0 : c.sizes.front();
  return c;
}

double branching_prediction(int K, double rho, std::optional<int> t) {
  if (K < 2) throw ParameterError("branching_prediction: K must be >= 2");
  if (!(rho >= 0.0 && rho <= 1.0)) throw ParameterError("branching_prediction: rho must lie in [0, 1]");
  const double x = (K - 1) * rho;
  if (!t) {
    if (x >= 1.0) return std::numeric_limits<double>::infinity();
    return 1.0 / (1.0 - x);
  }
  if (*t < 0) throw ParameterError("branching_prediction: t must be >= 0");
  if (x == 1.0) return static_cast<double>(*t);
  return (std::pow(x, *t) - 1.0) / (x - 1.0);
}

double finite_size_cap(double n_pred, double rho, std::int64_t n_total) {
  return std::min(n_pred, rho * static_cast<double>(n_total));
}

std::vector<std::int64_t> sample_avalanche_sizes(const Network& net, double rho, int runs,
                                                 std::uint64_t seed, SeedMode mode) {
  if (net.n_nodes() < 1) throw ParameterError("avalanche sampling: empty network");
  if (!(rho >= 0.0 && rho <= 1.0)) throw ParameterError("avalanche sampling: rho must lie in [0, 1]");
  if (runs < 1) throw ParameterError("avalanche sampling: runs must be >= 1");

  const auto n = static_cast<std::size_t>(net.n_nodes());
  std::vector<std::uint32_t> stamp(n, 0);  // node decided in run `stamp`
  std::vector<NodeId> stack;
  std::vector<std::int64_t> sizes;
  sizes.reserve(static_cast<std::size_t>(runs));
  Rng rng(seed);
  std::uint32_t epoch = 0;
  const bool tree = net.spec().kind == GeneratorKind::tree;

  for (int r = 0; r < runs; ++r) {
    if (++epoch == 0) {
      std::fill(stamp.begin(), stamp.end(), 0);
      epoch = 1;
    }
    // Trees start at the root so every generation has the full K-1 fan-out.
    const auto s = tree ? NodeId{0} : static_cast<NodeId>(rng.below(n));
    stamp[s] = epoch;
    if (mode == SeedMode::upstream && net.degree(s) > 0) {
      auto nb = net.neighbors(s);
      stamp[nb[rng.below(nb.size())]] = epoch;
    }
    std::int64_t count = 1;
    stack.assign(1, s);
    while (!stack.empty()) {
      const NodeId u = stack.back();
      stack.pop_back();
      for (NodeId v : net.neighbors(u)) {
        if (stamp[v] == epoch) continue;
        stamp[v] = epoch;
        if (rng.bernoulli(rho)) {
          stack.push_back(v);
          ++count;
        }
      }
    }
    sizes.push_back(count);
  }
  return sizes;
}

SampleStats summarize(std::span<const std::int64_t> sizes) {
  SampleStats st;
  if (sizes.empty()) return st;
  const double n = static_cast<double>(sizes.size());
  double sum = 0.0;
  for (auto s : sizes) sum += static_cast<double>(s);
  st.mean = sum / n;
  double ss = 0.0;
  for (auto s : sizes) {
    const double d = static_cast<double>(s) - st.mean;
    ss += d * d;
  }
  st.variance = sizes.size() > 1 ? ss / (n - 1.0) : 0.0;
  const double sd = std::sqrt(st.variance);
  st.cv = st.mean > 0.0 ? sd / st.mean : 0.0;
  st.std_error = sd / std::sqrt(n);
  return st;
}

namespace {

struct LineFit {
  bool ok = false;
  double intercept = 0.0;
  double slope = 0.0;
  double ssr = std::numeric_limits<double>::infinity();
};

// Weighted least squares of ln(mean) on -ln(1 - rho/rho_c) over the points
// flagged in `use`.
LineFit fit_at(double rho_c, std::span<const double> rho, std::span<const double> y,
               std::span<const double> w, const std::vector<bool>& use) {
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t j = 0; j < rho.size(); ++j) {
    if (!use[j]) continue;
    if (rho[j] >= rho_c) return {};
    const double x = -std::log1p(-rho[j] / rho_c);
    sw += w[j];
    sx += w[j] * x;
    sy += w[j] * y[j];
    sxx += w[j] * x * x;
    sxy += w[j] * x * y[j];
    ++m;
  }
  if (m < 3) return {};
  const double det = sw * sxx - sx * sx;
  if (!(det > 0.0)) return {};
  LineFit f;
  f.slope = (sw * sxy - sx * sy) / det;
  f.intercept = (sy - f.slope * sx) / sw;
  f.ssr = 0.0;
  for (std::size_t j = 0; j < rho.size(); ++j) {
    if (!use[j]) continue;
    const double x = -std::log1p(-rho[j] / rho_c);
    const double e = y[j] - f.intercept - f.slope * x;
    f.ssr += w[j] * e * e;
  }
  f.ok = true;
  return f;
}

}  // namespace

ScalingFit fit_scaling(std::span<const double> rho_in, std::span<const double> mean_in,
                       std::span<const double> se_in) {
  ScalingFit out;
  const std::size_t m = rho_in.size();
  if (mean_in.size() != m || se_in.size() != m)
    throw ParameterError("fit_scaling: rho, mean and std_error lengths differ");

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return rho_in[a] < rho_in[b]; });
  std::vector<double> rho(m), mean(m), se(m), y(m), w(m);
  for (std::size_t j = 0; j < m; ++j) {
    rho[j] = rho_in[order[j]];
    mean[j] = mean_in[order[j]];
    se[j] = se_in[order[j]];
    out.points.push_back({rho[j], mean[j], se[j], std::numeric_limits<double>::quiet_NaN(), false});
  }

  if (m < 3) {
    out.message = "need at least 3 grid points";
    return out;
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (!(mean[j] > 0.0) || !std::isfinite(mean[j])) {
      out.message = "degenerate mean at rho=" + std::to_string(rho[j]);
      return out;
    }
    if (j > 0) {
      const double slack = 3.0 * std::hypot(se[j], se[j - 1]);
      if (mean[j] < mean[j - 1] - slack) {
        out.message = "non-monotone means near rho=" + std::to_string(rho[j]);
        return out;
      }
    }
    y[j] = std::log(mean[j]);
    const double sy = std::max(se[j] / mean[j], 1e-3);
    w[j] = 1.0 / (sy * sy);
  }

  std::vector<bool> use(m, true);
  double rho_c = 0.0;
  LineFit best;
  for (int pass = 0; pass < 6; ++pass) {
    double rho_hi = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      if (use[j]) rho_hi = std::max(rho_hi, rho[j]);

    // Coarse log scan over rho_c in (rho_hi, 20 rho_hi].
    const int n_scan = 400;
    const double lo = std::log(rho_hi * (1.0 + 1e-6)), hi = std::log(rho_hi * 20.0);
    int arg = -1;
    double best_ssr = std::numeric_limits<double>::infinity();
    std::vector<double> grid(n_scan);
    for (int s = 0; s < n_scan; ++s) {
      grid[s] = std::exp(lo + (hi - lo) * s / (n_scan - 1));
      auto f = fit_at(grid[s], rho, y, w, use);
      if (f.ok && f.ssr < best_ssr) {
        best_ssr = f.ssr;
        arg = s;
      }
    }
    if (arg < 0) {
      out.message = "too few usable points in the subcritical window";
      return out;
    }
    if (arg == n_scan - 1) {
      out.message = "no finite critical density: fit prefers rho_c -> infinity";
      return out;
    }
    // Golden-section refinement between the scan neighbours.
    double a = grid[std::max(arg - 1, 0)], b = grid[arg + 1];
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    auto ssr = [&](double rc) { return fit_at(rc, rho, y, w, use).ssr; };
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = ssr(c), fd = ssr(d);
    for (int it = 0; it < 100 && (b - a) > 1e-12 * b; ++it) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - g * (b - a);
        fc = ssr(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + g * (b - a);
        fd = ssr(d);
      }
    }
    const double rc = fc < fd ? c : d;
    best = fit_at(rc, rho, y, w, use);
    if (!best.ok) {
      out.message = "least-squares fit failed";
      return out;
    }
    rho_c = rc;

    std::vector<bool> next(m);
    for (std::size_t j = 0; j < m; ++j) next[j] = rho[j] <= 0.95 * rho_c;
    if (next == use) break;
    if (std::count(next.begin(), next.end(), true) < 3) {
      out.message = "fewer than 3 points below 0.95 rho_c";
      out.rho_c = rho_c;
      return out;
    }
    use = std::move(next);
  }

  out.ok = true;
  out.rho_c = rho_c;
  out.gamma = best.slope;
  out.S = std::exp(best.intercept);
  for (std::size_t j = 0; j < m; ++j) {
    out.points[j].used = use[j];
    if (use[j]) {
      const double x = -std::log1p(-rho[j] / rho_c);
      out.points[j].residual = y[j] - best.intercept - best.slope * x;
    }
  }
  return out;
}

ScalingFit estimate_scaling(const GeneratorSpec& family, std::span<const double> rho_grid,
                            int runs_per_point, std::uint64_t seed, SeedMode mode) {
  if (runs_per_point < 100) throw ParameterError("estimate_scaling: runs_per_point must be >= 100");
  for (double r : rho_grid)
    if (!(r > 0.0 && r < 1.0)) throw ParameterError("estimate_scaling: rho grid must lie inside (0, 1)");
  const Network net = build_network(family);
  std::vector<double> rho(rho_grid.begin(), rho_grid.end()), mean, se;
  for (std::size_t j = 0; j < rho.size(); ++j) {
    auto sizes = sample_avalanche_sizes(net, rho[j], runs_per_point, derive_seed(seed, j), mode);
    auto st = summarize(sizes);
    mean.push_back(st.mean);
    se.push_back(st.std_error);
  }
  return fit_scaling(rho, mean, se);
}

}  // namespace minsky::perc
