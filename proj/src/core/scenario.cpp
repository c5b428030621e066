#include "minsky/core/scenario.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace minsky {

namespace fs = std::filesystem;

namespace {

std::string join_issues(const std::vector<ConfigIssue>& issues) {
  std::string s = "invalid config:";
  for (const auto& i : issues) s += "\n  " + (i.pointer.empty() ? "/" : i.pointer) + ": " + i.message;
  return s;
}

// Collects issues while reading a document.
class Reader {
public:
  explicit Reader(const json& doc) : doc_(doc) {}

  void issue(const std::string& ptr, const std::string& msg) { issues_.push_back({ptr, msg}); }
  const std::vector<ConfigIssue>& issues() const { return issues_; }

  const json* at(const std::string& ptr) const {
    const json::json_pointer jp(ptr);
    return doc_.contains(jp) ? &doc_.at(jp) : nullptr;
  }

  std::optional<double> number(const std::string& ptr, bool required, bool positive = false) {
    const json* v = at(ptr);
    if (!v) {
      if (required) issue(ptr, "required number is missing");
      return std::nullopt;
    }
    if (!v->is_number()) {
      issue(ptr, "must be a number");
      return std::nullopt;
    }
    const double x = v->get<double>();
    if (!std::isfinite(x)) {
      issue(ptr, "must be finite");
      return std::nullopt;
    }
    if (positive && !(x > 0.0)) {
      issue(ptr, "must be > 0");
      return std::nullopt;
    }
    return x;
  }

  std::optional<std::int64_t> integer(const std::string& ptr, bool required, std::int64_t min) {
    const json* v = at(ptr);
    if (!v) {
      if (required) issue(ptr, "required integer is missing");
      return std::nullopt;
    }
    if (!v->is_number_integer()) {
      issue(ptr, "must be an integer");
      return std::nullopt;
    }
    const auto x = v->get<std::int64_t>();
    if (x < min) {
      issue(ptr, "must be >= " + std::to_string(min));
      return std::nullopt;
    }
    return x;
  }

  std::optional<std::string> string(const std::string& ptr, bool required,
                                    std::initializer_list<const char*> allowed = {}) {
    const json* v = at(ptr);
    if (!v) {
      if (required) issue(ptr, "required string is missing");
      return std::nullopt;
    }
    if (!v->is_string()) {
      issue(ptr, "must be a string");
      return std::nullopt;
    }
    auto s = v->get<std::string>();
    if (allowed.size() == 0) return s;
    for (const char* a : allowed)
      if (s == a) return s;
    std::string msg = "must be one of";
    for (const char* a : allowed) msg += std::string(" ") + a;
    issue(ptr, msg);
    return std::nullopt;
  }

  std::optional<bool> boolean(const std::string& ptr) {
    const json* v = at(ptr);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) {
      issue(ptr, "must be true or false");
      return std::nullopt;
    }
    return v->get<bool>();
  }

  std::vector<perc::NodeId> ids(const std::string& ptr, std::optional<std::int64_t> n) {
    std::vector<perc::NodeId> out;
    const json* v = at(ptr);
    if (!v) return out;
    if (!v->is_array()) {
      issue(ptr, "must be an array of node ids");
      return out;
    }
    for (std::size_t j = 0; j < v->size(); ++j) {
      const auto p = ptr + "/" + std::to_string(j);
      if (auto x = integer(p, true, 0)) {
        if (n && *x >= *n)
          issue(p, "node id " + std::to_string(*x) + " out of range [0, " + std::to_string(*n) + ")");
        else
          out.push_back(*x);
      }
    }
    return out;
  }

  std::vector<perc::Edge> edges(const std::string& ptr, std::optional<std::int64_t> n) {
    std::vector<perc::Edge> out;
    const json* v = at(ptr);
    if (!v) return out;
    if (!v->is_array()) {
      issue(ptr, "must be an array of [u, v] pairs");
      return out;
    }
    for (std::size_t j = 0; j < v->size(); ++j) {
      const auto p = ptr + "/" + std::to_string(j);
      const auto& e = (*v)[j];
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer()) {
        issue(p, "must be a pair of integer node ids");
        continue;
      }
      const auto a = e[0].get<std::int64_t>(), b = e[1].get<std::int64_t>();
      if (a < 0 || b < 0 || (n && (a >= *n || b >= *n))) {
        issue(p, "edge references a missing node");
        continue;
      }
      out.emplace_back(a, b);
    }
    return out;
  }

  void only_keys(const std::string& ptr, std::initializer_list<const char*> keys) {
    const json* v = ptr.empty() ? &doc_ : at(ptr);
    if (!v || !v->is_object()) return;
    for (const auto& [k, _] : v->items()) {
      bool known = false;
      for (const char* a : keys) known = known || k == a;
      if (!known) issue(ptr + "/" + k, "unknown key");
    }
  }

private:
  const json& doc_;
  std::vector<ConfigIssue> issues_;
};

abm::RateRule parse_rule(const std::string& s) {
  if (s == "procyclical") return abm::RateRule::procyclical;
  if (s == "counter_cyclical") return abm::RateRule::counter_cyclical;
  if (s == "self_regulating") return abm::RateRule::self_regulating;
  return abm::RateRule::manual_override;
}

std::optional<std::int64_t> tree_size(std::int64_t K, std::int64_t depth) {
  std::int64_t total = 1, level = 1;
  for (std::int64_t d = 0; d < depth; ++d) {
    level *= d == 0 ? K : K - 1;
    total += level;
    if (total > (std::int64_t{1} << 40)) return std::nullopt;
  }
  return total;
}

abm::PolicySpec read_policy(Reader& r, const std::string& ptr, double default_alpha) {
  abm::PolicySpec p;
  p.alpha = default_alpha;
  if (!r.at(ptr)) return p;
  r.only_keys(ptr, {"rule", "alpha", "rate", "floor"});
  if (auto rule = r.string(ptr + "/rule", false,
                           {"procyclical", "counter_cyclical", "self_regulating", "manual_override"}))
    p.rule = parse_rule(*rule);
  if (auto a = r.number(ptr + "/alpha", false)) p.alpha = *a;
  if (auto rate = r.number(ptr + "/rate", p.rule == abm::RateRule::manual_override, true))
    p.manual_rate = *rate;
  if (auto f = r.number(ptr + "/floor", false, true)) p.floor = *f;
  return p;
}

std::optional<abm::Intervention> read_intervention(Reader& r, const std::string& ptr,
                                                   std::optional<std::int64_t> n, double alpha) {
  auto kind = r.string(ptr + "/kind", true,
                       {"immunize_nodes", "guarantee_edges", "set_rate", "set_policy"});
  if (!kind) return std::nullopt;
  if (*kind == "immunize_nodes") {
    if (!r.at(ptr + "/ids")) r.issue(ptr + "/ids", "required array is missing");
    return abm::ImmunizeNodes{r.ids(ptr + "/ids", n)};
  }
  if (*kind == "guarantee_edges") {
    if (!r.at(ptr + "/edges")) r.issue(ptr + "/edges", "required array is missing");
    return abm::GuaranteeEdges{r.edges(ptr + "/edges", n)};
  }
  if (*kind == "set_rate") {
    auto rate = r.number(ptr + "/rate", true, true);
    return abm::SetRate{rate.value_or(1.0)};
  }
  if (!r.at(ptr + "/policy")) r.issue(ptr + "/policy", "required object is missing");
  return abm::SetPolicy{read_policy(r, ptr + "/policy", alpha)};
}

}  // namespace

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : ParameterError(join_issues(issues)), issues_(std::move(issues)) {}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::vector<ConfigIssue>{{"", path + ": " + e.what()}});
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

std::string fmt_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

// Reads a network block at ptr; returns the node count when known.
static std::optional<std::int64_t> read_network(Reader& r, const std::string& ptr, const std::string& base_dir,
                                         perc::GeneratorSpec& out) {
  std::optional<std::int64_t> n;
  if (!r.at(ptr) || !r.at(ptr)->is_object()) {
    r.issue(ptr, "required object is missing");
  } else {
    r.only_keys(ptr, {"type", "n", "K", "mean_degree", "depth", "edges", "edges_file"});
    auto type = r.string(ptr + "/type", true, {"random_regular", "erdos_renyi", "tree", "explicit"});
    if (type == "random_regular") {
      auto nn = r.integer(ptr + "/n", true, 1);
      auto K = r.integer(ptr + "/K", true, 0);
      if (nn && K) {
        if (*K >= *nn) r.issue(ptr + "/K", "must be < n");
        else if ((*nn * *K) % 2) r.issue(ptr + "/K", "n*K must be even");
        else out = perc::GeneratorSpec::random_regular(*nn, static_cast<int>(*K), 0);
        n = nn;
      }
    } else if (type == "erdos_renyi") {
      auto nn = r.integer(ptr + "/n", true, 1);
      auto md = r.number(ptr + "/mean_degree", true);
      if (md && *md < 0) r.issue(ptr + "/mean_degree", "must be >= 0");
      if (nn && md) out = perc::GeneratorSpec::erdos_renyi(*nn, *md, 0);
      n = nn;
    } else if (type == "tree") {
      auto K = r.integer(ptr + "/K", true, 2);
      auto depth = r.integer(ptr + "/depth", true, 0);
      if (K && depth) {
        n = tree_size(*K, *depth);
        if (!n) r.issue(ptr + "/depth", "tree too large");
        else out = perc::GeneratorSpec::tree(static_cast<int>(*K), static_cast<int>(*depth));
      }
    } else if (type == "explicit") {
      std::vector<perc::Edge> edges;
      if (r.at(ptr + "/edges") && r.at(ptr + "/edges_file")) {
        r.issue(ptr + "/edges_file", "give either edges or edges_file, not both");
      } else if (auto file = r.string(ptr + "/edges_file", false)) {
        fs::path p(*file);
        if (p.is_relative()) p = fs::path(base_dir) / p;
        try {
          edges = perc::read_edge_list(p.string());
        } catch (const Error& e) {
          r.issue(ptr + "/edges_file", e.what());
        }
      } else if (r.at(ptr + "/edges")) {
        edges = r.edges(ptr + "/edges", std::nullopt);
      } else {
        r.issue(ptr + "/edges", "explicit network needs edges or edges_file");
      }
      std::int64_t max_id = -1;
      for (auto [u, v] : edges) max_id = std::max({max_id, u, v});
      auto nn = r.integer(ptr + "/n", false, 1);
      if (nn && *nn <= max_id) r.issue(ptr + "/n", "smaller than the largest node id + 1");
      n = nn ? *nn : max_id + 1;
      if (*n < 1) r.issue(ptr, "explicit network has no nodes");
      try {
        perc::Network check(*n, edges);
      } catch (const Error& e) {
        r.issue(ptr + "/edges", e.what());
      }
      out = perc::GeneratorSpec::from_edges(*n, std::move(edges));
    }
  }

  return n;
}

Scenario parse_scenario(const json& doc, const std::string& base_dir) {
  if (!doc.is_object()) throw ConfigError(std::vector<ConfigIssue>{{"", "scenario must be a JSON object"}});
  Reader r(doc);
  Scenario sc;
  auto& c = sc.sim;
  r.only_keys("", {"network", "resilience", "i0", "alpha", "policy", "rate_driver", "seeds",
                   "immunized", "guaranteed_edges", "ticks", "ensemble", "seed", "analytics",
                   "hedge_margin", "interventions", "server", "description"});

  const auto n = read_network(r, "/network", base_dir, c.network);

  // resilience
  if (!r.at("/resilience")) {
    r.issue("/resilience", "required object is missing");
  } else {
    r.only_keys("/resilience", {"k", "beta", "mode", "shuffle"});
    if (auto k = r.number("/resilience/k", true, true)) c.resilience.k = *k;
    if (auto b = r.number("/resilience/beta", true, true)) c.resilience.beta = *b;
    if (auto m = r.string("/resilience/mode", false, {"rank", "iid"}))
      c.resilience.mode = *m == "iid" ? econ::ResilienceMode::iid_pareto
                                      : econ::ResilienceMode::rank_deterministic;
    if (auto s = r.boolean("/resilience/shuffle")) c.shuffle_ranks = *s;
  }

  if (auto i0 = r.number("/i0", true, true)) c.i0 = *i0;
  const double alpha = r.number("/alpha", false).value_or(0.0);
  c.policy = read_policy(r, "/policy", alpha);
  if (auto d = r.string("/rate_driver", false, {"cumulative", "per_tick"}))
    c.driver = *d == "per_tick" ? abm::RateDriver::per_tick : abm::RateDriver::cumulative;

  if (const json* s = r.at("/seeds")) {
    if (s->is_object()) {
      r.only_keys("/seeds", {"ids", "random"});
      c.seeds = r.ids("/seeds/ids", n);
      if (auto m = r.integer("/seeds/random", false, 0)) {
        if (n && *m > *n) r.issue("/seeds/random", "more random seeds than nodes");
        c.random_seeds = *m;
      }
    } else {
      c.seeds = r.ids("/seeds", n);
    }
  }
  c.immunized = r.ids("/immunized", n);
  c.guaranteed_edges = r.edges("/guaranteed_edges", n);
  c.ticks = r.integer("/ticks", false, 0).value_or(0);
  if (const json* s = r.at("/seed")) {
    if (s->is_number_unsigned()) c.seed = s->get<std::uint64_t>();
    else if (s->is_number_integer() && s->get<std::int64_t>() >= 0) c.seed = s->get<std::uint64_t>();
    else r.issue("/seed", "must be a non-negative integer");
  }

  if (r.at("/ensemble")) {
    r.only_keys("/ensemble", {"runs", "reseed"});
    sc.ensemble_runs = static_cast<int>(r.integer("/ensemble/runs", true, 2).value_or(0));
    sc.ensemble_reseed = r.boolean("/ensemble/reseed").value_or(true);
  }

  if (r.at("/analytics")) {
    r.only_keys("/analytics", {"S", "gamma", "rho_C"});
    Analytics a;
    a.S = r.number("/analytics/S", false, true).value_or(1.0);
    a.gamma = r.number("/analytics/gamma", false, true).value_or(1.0);
    if (auto rc = r.number("/analytics/rho_C", true, true)) {
      if (*rc >= 1.0) r.issue("/analytics/rho_C", "must be < 1");
      a.rho_C = *rc;
    }
    sc.analytics = a;
  } else {
    sc.analytics = default_analytics(c.network);
  }

  if (auto h = r.number("/hedge_margin", false)) {
    if (*h < 0) r.issue("/hedge_margin", "must be >= 0");
    sc.hedge_margin = *h;
  }

  if (const json* iv = r.at("/interventions")) {
    if (!iv->is_array()) {
      r.issue("/interventions", "must be an array");
    } else {
      for (std::size_t j = 0; j < iv->size(); ++j) {
        const auto p = "/interventions/" + std::to_string(j);
        r.only_keys(p, {"tick", "kind", "ids", "edges", "rate", "policy"});
        auto t = r.integer(p + "/tick", true, 0);
        auto x = read_intervention(r, p, n, alpha);
        if (t && x) c.scheduled.push_back({*t, std::move(*x)});
      }
    }
  }

  if (r.at("/server")) {
    r.only_keys("/server", {"bind", "port"});
    if (auto b = r.string("/server/bind", false)) sc.bind = *b;
    if (auto p = r.integer("/server/port", false, 0)) {
      if (*p > 65535) r.issue("/server/port", "must be <= 65535");
      sc.port = static_cast<int>(*p);
    }
  }

  if (!r.issues().empty()) throw ConfigError(r.issues());
  sc.document = doc;
  return sc;
}

Scenario load_scenario(const std::string& path) {
  const json doc = load_json_file(path);
  return parse_scenario(doc, fs::path(path).parent_path().string().empty()
                                 ? std::string(".")
                                 : fs::path(path).parent_path().string());
}

std::optional<Analytics> default_analytics(const perc::GeneratorSpec& net) {
  Analytics a;
  switch (net.kind) {
    case perc::GeneratorKind::random_regular:
    case perc::GeneratorKind::tree:
      if (net.K < 3) return std::nullopt;
      a.rho_C = 1.0 / (net.K - 1);
      return a;
    case perc::GeneratorKind::erdos_renyi:
      if (!(net.mean_degree > 1.0)) return std::nullopt;
      a.rho_C = 1.0 / net.mean_degree;
      return a;
    case perc::GeneratorKind::explicit_edges:
      return std::nullopt;
  }
  return std::nullopt;
}

std::optional<netacc::CombinedParams> combined_params(const Scenario& sc) {
  if (!sc.analytics || !(sc.analytics->rho_C > 0.0 && sc.analytics->rho_C < 1.0)) return std::nullopt;
  netacc::CombinedParams p;
  p.i0 = sc.sim.i0;
  p.k = sc.sim.resilience.k;
  p.alpha = sc.sim.policy.alpha;
  p.beta = sc.sim.resilience.beta;
  p.gamma = sc.analytics->gamma;
  p.S = sc.analytics->S;
  p.rho_C = sc.analytics->rho_C;
  const auto& g = sc.sim.network;
  if (g.kind == perc::GeneratorKind::tree) {
    auto n = tree_size(g.K, g.depth);
    if (!n) return std::nullopt;
    p.n_total = *n;
  } else {
    p.n_total = g.n;
  }
  return p;
}

ModelParams parse_model_params(const json& doc) {
  Reader r(doc);
  ModelParams p;
  r.only_keys("", {"i0", "k", "alpha", "beta", "mu", "gamma", "S", "rho_C", "n_total", "returns"});
  p.i0 = r.number("/i0", false, true);
  p.k = r.number("/k", false, true);
  p.alpha = r.number("/alpha", false);
  p.beta = r.number("/beta", false, true);
  p.mu = r.number("/mu", false, true);
  p.gamma = r.number("/gamma", false, true);
  p.S = r.number("/S", false, true);
  p.rho_C = r.number("/rho_C", false, true);
  if (p.rho_C && *p.rho_C >= 1.0) r.issue("/rho_C", "must be < 1");
  p.n_total = r.integer("/n_total", false, 1);
  if (auto m = r.string("/returns", false, {"decreasing", "increasing"}))
    p.returns = *m == "increasing" ? walras::ReturnsMode::increasing : walras::ReturnsMode::decreasing;
  if (!r.issues().empty()) throw ConfigError(r.issues());
  return p;
}

json to_json(const ModelParams& p) {
  json j = json::object();
  auto put = [&](const char* k, const auto& v) {
    if (v) j[k] = *v;
  };
  put("i0", p.i0);
  put("k", p.k);
  put("alpha", p.alpha);
  put("beta", p.beta);
  put("mu", p.mu);
  put("gamma", p.gamma);
  put("S", p.S);
  put("rho_C", p.rho_C);
  put("n_total", p.n_total);
  j["returns"] = p.returns == walras::ReturnsMode::increasing ? "increasing" : "decreasing";
  return j;
}

abm::PolicySpec policy_from_json(const json& j, double default_alpha) {
  json wrap = {{"policy", j}};
  Reader r(wrap);
  auto p = read_policy(r, "/policy", default_alpha);
  if (!r.issues().empty()) throw ConfigError(r.issues());
  return p;
}

abm::Intervention intervention_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError(std::vector<ConfigIssue>{{"", "intervention must be an object"}});
  Reader r(j);
  r.only_keys("", {"kind", "ids", "edges", "rate", "policy", "tick"});
  auto iv = read_intervention(r, "", std::nullopt, 0.0);
  if (!r.issues().empty() || !iv) throw ConfigError(r.issues());
  return *iv;
}

json to_json(const abm::PolicySpec& p) {
  json j = {{"rule", std::string(abm::to_string(p.rule))}, {"alpha", p.alpha}};
  if (p.rule == abm::RateRule::manual_override) j["rate"] = p.manual_rate;
  if (p.floor) j["floor"] = *p.floor;
  return j;
}

json to_json(const abm::Intervention& iv) {
  json j = {{"kind", std::string(abm::kind_name(iv))}};
  if (auto* a = std::get_if<abm::ImmunizeNodes>(&iv)) j["ids"] = a->ids;
  if (auto* b = std::get_if<abm::GuaranteeEdges>(&iv)) {
    j["edges"] = json::array();
    for (auto [u, v] : b->edges) j["edges"].push_back({u, v});
  }
  if (auto* c = std::get_if<abm::SetRate>(&iv)) j["rate"] = c->rate;
  if (auto* d = std::get_if<abm::SetPolicy>(&iv)) j["policy"] = to_json(d->policy);
  return j;
}

json to_json(const abm::LoggedIntervention& l) {
  json j = to_json(l.intervention);
  j["tick"] = l.tick;
  return j;
}

json to_json(const walras::Trajectory& t) {
  json steps = json::array();
  for (const auto& s : t.steps) steps.push_back({{"t", s.t}, {"N", s.n}, {"i", s.i}});
  json j = {{"steps", steps}, {"termination", std::string(walras::to_string(t.reason))},
            {"tolerance", t.tolerance}};
  if (t.reason == walras::Termination::diverged) j["bound"] = t.bound;
  return j;
}

json to_json(const netacc::FixedPointSet& f) {
  auto opt = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
  json pts = json::array();
  for (const auto& p : f.points) {
    const char* br = p.branch == netacc::Branch::percolation ? "percolation"
                     : p.branch == netacc::Branch::ponzi     ? "ponzi"
                                                             : "cap";
    pts.push_back({{"N", p.n}, {"i", p.i}, {"branch", br}, {"log_slope", p.log_slope},
                   {"stable", p.stable}});
  }
  return {{"n_conv", opt(f.n_conv)},
          {"n_div", opt(f.n_div)},
          {"n_core", opt(f.n_core)},
          {"regime", std::string(netacc::to_string(f.regime))},
          {"quadratic", f.quadratic},
          {"points", pts}};
}

json to_json(const netacc::Thresholds& t) {
  auto opt = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
  return {{"i_C", t.i_C},         {"i_safe", t.i_safe}, {"N_safe", t.n_safe},
          {"rho_safe", t.rho_safe}, {"i_0C", t.i_0C},   {"N_0C", t.n_0C},
          {"rho_0C", t.rho_0C},   {"i_safe_exact", opt(t.i_safe_exact)},
          {"N_safe_exact", opt(t.n_safe_exact)}};
}

json to_json(const perc::ScalingFit& f) {
  json pts = json::array();
  for (const auto& p : f.points)
    pts.push_back({{"rho", p.rho},
                   {"mean", p.mean},
                   {"std_error", p.std_error},
                   {"residual", std::isnan(p.residual) ? json(nullptr) : json(p.residual)},
                   {"used", p.used}});
  json j = {{"ok", f.ok}, {"points", pts}};
  if (f.ok) {
    j["rho_C"] = f.rho_c;
    j["gamma"] = f.gamma;
    j["S"] = f.S;
  } else {
    j["message"] = f.message;
  }
  return j;
}

json to_json(const abm::TickDelta& d) {
  json ivs = json::array();
  for (const auto& l : d.applied_interventions) ivs.push_back(to_json(l));
  return {{"tick", d.tick},
          {"i_current", d.i_current},
          {"new_failures", d.new_failures},
          {"new_ponzi", d.new_ponzi},
          {"recovered", d.recovered},
          {"applied_interventions", ivs}};
}

json to_json(const abm::EnsembleStats& e) {
  return {{"runs", e.final_failures.size()},
          {"final_failures", e.final_failures},
          {"mean_final", e.mean_final},
          {"cv_final", e.cv_final},
          {"mean_per_tick", e.mean_per_tick},
          {"variance_per_tick", e.variance_per_tick},
          {"mean_cumulative", e.mean_cumulative},
          {"variance_cumulative", e.variance_cumulative},
          {"bottleneck",
           {{"fired", e.bottleneck.fired},
            {"tick", e.bottleneck.fired ? json(e.bottleneck.tick) : json(nullptr)},
            {"value", e.bottleneck.value}}}};
}

json snapshot_json(const Scenario& sc, const abm::SimState& s, bool include_firms) {
  json j;
  j["tick"] = s.tick;
  j["i0"] = s.i0;
  j["i_current"] = s.i_current;
  j["cumulative_failed"] = s.cumulative_failed;
  j["currently_ponzi"] = s.firms.count(econ::FirmStatus::ponzi);
  j["per_tick_failures"] = s.per_tick_failures;
  j["ponzi_series"] = s.ponzi_series;
  j["rate_series"] = s.rate_series;
  j["policy"] = to_json(s.policy);
  j["rate_driver"] = std::string(abm::to_string(s.driver));
  j["pending_rate"] = s.pending_rate ? json(*s.pending_rate) : json(nullptr);
  j["seed"] = s.seed;

  const auto& net = *s.network;
  json edges = json::array();
  for (auto [u, v] : net.edges()) edges.push_back({u, v});
  j["network"] = {{"type", std::string(perc::to_string(net.spec().kind))},
                  {"n", net.n_nodes()},
                  {"layout_seed", net.spec().seed},
                  {"edges", include_firms ? edges : json(nullptr)}};
  json g = json::array();
  for (auto [u, v] : s.guaranteed) g.push_back({u, v});
  j["guaranteed_edges"] = g;

  if (include_firms) {
    json firms = json::array();
    for (const auto& f : s.firms.firms()) {
      const auto label = econ::finance_label(f.resilience, s.i_current, sc.hedge_margin);
      firms.push_back({{"id", f.id},
                       {"resilience", f.resilience},
                       {"status", std::string(econ::to_string(f.status))},
                       {"immunized", f.immunized},
                       {"distance_to_ponzi", f.distance_to_ponzi},
                       {"label", f.status == econ::FirmStatus::failed ? "failed"
                                                                      : std::string(econ::to_string(label))}});
    }
    j["firms"] = firms;
  }

  json ivs = json::array();
  for (const auto& l : s.log) ivs.push_back(to_json(l));
  j["interventions"] = ivs;

  j["thresholds"] = nullptr;
  j["fixed_points"] = nullptr;
  j["phase"] = nullptr;
  if (auto p = combined_params(sc)) {
    try {
      j["thresholds"] = to_json(netacc::thresholds(*p));
      const auto fps = netacc::solve_fixed_points(*p);
      j["fixed_points"] = to_json(fps);
      const double n0 = static_cast<double>(s.per_tick_failures.front());
      if (n0 >= 1.0 && p->ab() < 1.0)
        j["phase"] = std::string(netacc::to_string(netacc::classify_phase(fps, n0)));
    } catch (const Error&) {
      // analytics do not apply to these parameters (e.g. alpha <= 0)
    }
  }
  std::ostringstream hs;
  hs << std::hex << state_hash(s);
  j["state_hash"] = hs.str();
  return j;
}

std::uint64_t state_hash(const abm::SimState& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const void* p, std::size_t n) {
    auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t j = 0; j < n; ++j) {
      h ^= b[j];
      h *= 0x100000001b3ULL;
    }
  };
  auto mix_val = [&](const auto& v) { mix(&v, sizeof v); };
  mix_val(s.tick);
  mix_val(s.i_current);
  mix_val(s.cumulative_failed);
  for (const auto& f : s.firms.firms()) {
    mix_val(f.status);
    mix_val(f.immunized);
  }
  for (auto e : s.guaranteed) mix_val(e);
  const double pending = s.pending_rate.value_or(-1.0);
  mix_val(pending);
  mix_val(s.policy.rule);
  mix_val(s.policy.alpha);
  const std::size_t log_size = s.log.size();
  mix_val(log_size);
  return h;
}

void write_trajectory_csv(std::ostream& os, const walras::Trajectory& t) {
  os << "t,N,i\n";
  for (const auto& s : t.steps) os << s.t << ',' << fmt_double(s.n) << ',' << fmt_double(s.i) << '\n';
}

void write_series_csv(std::ostream& os, const abm::SimState& s) {
  os << "tick,new_failures,cumulative_failed,currently_ponzi,i_current\n";
  std::int64_t cum = 0;
  // Tick 0 is the seeded initial state; the zero-tick scenario therefore has only the header.
  for (std::size_t t = 0; t < s.per_tick_failures.size(); ++t) {
    cum += s.per_tick_failures[t];
    if (t == 0) continue;
    os << t << ',' << s.per_tick_failures[t] << ',' << cum << ',' << s.ponzi_series[t] << ','
       << fmt_double(s.rate_series[t]) << '\n';
  }
}

void write_phase_csv(std::ostream& os, const netacc::PhaseGrid& g) {
  os << "N0," << (g.spec.axis == netacc::PhaseAxis::i0 ? "i0" : "rho0") << ",label\n";
  for (const auto& row : g.rows)
    for (std::size_t x = 0; x < g.n0.size(); ++x)
      os << fmt_double(g.n0[x]) << ',' << fmt_double(row.y) << ','
         << netacc::to_string(row.labels[x]) << '\n';
}

json phase_sidecar(const netacc::PhaseGrid& g) {
  json rows = json::array();
  for (const auto& row : g.rows) {
    json r = to_json(row.fixed_points);
    r.erase("points");
    r["y"] = row.y;
    r["i0"] = row.i0;
    r["network_curves"] = row.percolation_roots;
    rows.push_back(r);
  }
  return {{"axis", g.spec.axis == netacc::PhaseAxis::i0 ? "i0" : "rho0"},
          {"n0", g.n0},
          {"thresholds", to_json(g.thresholds)},
          {"boundaries", rows},
          {"csv_schema_version", kCsvSchemaVersion}};
}

void write_scaling_csv(std::ostream& os, const perc::ScalingFit& f) {
  os << "rho,mean,std_error,residual,used\n";
  for (const auto& p : f.points)
    os << fmt_double(p.rho) << ',' << fmt_double(p.mean) << ',' << fmt_double(p.std_error) << ','
       << (std::isnan(p.residual) ? std::string() : fmt_double(p.residual)) << ','
       << (p.used ? 1 : 0) << '\n';
}

void write_ensemble_csv(std::ostream& os, const abm::EnsembleStats& e) {
  os << "tick,mean_new_failures,var_new_failures,mean_cumulative,var_cumulative\n";
  for (std::size_t t = 0; t < e.mean_per_tick.size(); ++t)
    os << t << ',' << fmt_double(e.mean_per_tick[t]) << ',' << fmt_double(e.variance_per_tick[t])
       << ',' << fmt_double(e.mean_cumulative[t]) << ',' << fmt_double(e.variance_cumulative[t])
       << '\n';
}

void write_runs_csv(std::ostream& os, const abm::EnsembleStats& e) {
  os << "run,final_failures\n";
  for (std::size_t r = 0; r < e.final_failures.size(); ++r) os << r << ',' << e.final_failures[r] << '\n';
}

PhaseRequest parse_phase_request(const json& doc) {
  if (!doc.is_object()) throw ConfigError(std::vector<ConfigIssue>{{"", "request must be a JSON object"}});
  Reader r(doc);
  r.only_keys("", {"params", "grid"});
  r.only_keys("/params", {"i0", "k", "alpha", "beta", "gamma", "S", "rho_C", "n_total"});
  r.only_keys("/grid", {"axis", "n0_min", "n0_max", "n0_count", "y_min", "y_max", "y_count", "log_spacing"});
  PhaseRequest req;
  auto& c = req.params;
  auto& g = req.grid;
  if (auto x = r.number("/params/k", true, true)) c.k = *x;
  if (auto x = r.number("/params/alpha", true, true)) c.alpha = *x;
  if (auto x = r.number("/params/beta", true, true)) c.beta = *x;
  c.gamma = r.number("/params/gamma", false, true).value_or(1.0);
  c.S = r.number("/params/S", false, true).value_or(1.0);
  if (auto x = r.number("/params/rho_C", true, true)) {
    if (*x >= 1.0) r.issue("/params/rho_C", "must be < 1");
    c.rho_C = *x;
  }
  if (auto x = r.integer("/params/n_total", true, 1)) c.n_total = *x;
  auto i0 = r.number("/params/i0", false, true);
  if (auto a = r.string("/grid/axis", false, {"i0", "rho0"}))
    g.axis = *a == "rho0" ? netacc::PhaseAxis::rho0 : netacc::PhaseAxis::i0;
  g.n0_min = r.number("/grid/n0_min", false, true).value_or(g.n0_min);
  g.n0_max = r.number("/grid/n0_max", false, true).value_or(g.n0_max);
  g.n0_count = static_cast<int>(r.integer("/grid/n0_count", false, 2).value_or(g.n0_count));
  g.y_count = static_cast<int>(r.integer("/grid/y_count", false, 2).value_or(g.y_count));
  g.log_spacing = r.boolean("/grid/log_spacing").value_or(true);
  auto y_min = r.number("/grid/y_min", false, true);
  auto y_max = r.number("/grid/y_max", false, true);
  if (!r.issues().empty()) throw ConfigError(r.issues());

  // i0 is only a placeholder here: every row sets its own rate.
  c.i0 = i0.value_or(c.k);
  try {
    c.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(std::vector<ConfigIssue>{{"/params", e.what()}});
  }
  if (!y_min || !y_max) {
    // Default window brackets the coexistence band [i_safe, i_0C].
    const auto th = netacc::thresholds(c);
    double lo = 0.5 * th.i_safe, hi = 2.0 * th.i_0C;
    if (g.axis == netacc::PhaseAxis::rho0) {
      lo = netacc::density_from_rate(lo, c);
      hi = std::min(netacc::density_from_rate(hi, c), 1.0);
    }
    g.y_min = y_min.value_or(lo);
    g.y_max = y_max.value_or(hi);
  } else {
    g.y_min = *y_min;
    g.y_max = *y_max;
  }
  return req;
}

ScalingRequest parse_scaling_request(const json& doc, const std::string& base_dir) {
  if (!doc.is_object()) throw ConfigError(std::vector<ConfigIssue>{{"", "request must be a JSON object"}});
  Reader r(doc);
  r.only_keys("", {"network", "rho", "runs", "seed_mode", "seed"});
  ScalingRequest req;
  read_network(r, "/network", base_dir, req.family);
  if (const json* rho = r.at("/rho")) {
    if (rho->is_array()) {
      for (std::size_t j = 0; j < rho->size(); ++j)
        if (auto x = r.number("/rho/" + std::to_string(j), true, true)) req.rho.push_back(*x);
    } else if (rho->is_object()) {
      r.only_keys("/rho", {"min", "max", "count"});
      auto lo = r.number("/rho/min", true, true);
      auto hi = r.number("/rho/max", true, true);
      auto cnt = r.integer("/rho/count", true, 3);
      if (lo && hi && cnt) {
        if (*hi <= *lo) r.issue("/rho/max", "must exceed min");
        for (std::int64_t j = 0; j < *cnt; ++j)
          req.rho.push_back(*lo + (*hi - *lo) * static_cast<double>(j) / static_cast<double>(*cnt - 1));
      }
    } else {
      r.issue("/rho", "must be an array or {min, max, count}");
    }
  } else {
    r.issue("/rho", "required grid is missing");
  }
  for (double x : req.rho)
    if (x >= 1.0) r.issue("/rho", "densities must lie in (0, 1)");
  req.runs = static_cast<int>(r.integer("/runs", false, 100).value_or(req.runs));
  if (auto m = r.string("/seed_mode", false, {"upstream", "bare"}))
    req.mode = *m == "bare" ? perc::SeedMode::bare : perc::SeedMode::upstream;
  if (const json* sd = r.at("/seed")) {
    if (sd->is_number_unsigned() || (sd->is_number_integer() && sd->get<std::int64_t>() >= 0))
      req.seed = sd->get<std::uint64_t>();
    else
      r.issue("/seed", "must be a non-negative integer");
  }
  if (!r.issues().empty()) throw ConfigError(r.issues());
  return req;
}

json fixed_points_report(const ModelParams& p, std::optional<double> n0, int max_steps) {
  std::vector<ConfigIssue> missing;
  if (!p.i0) missing.push_back({"/i0", "required number is missing"});
  if (!p.k) missing.push_back({"/k", "required number is missing"});
  if (!p.alpha) missing.push_back({"/alpha", "required number is missing"});
  if (!p.beta) missing.push_back({"/beta", "required number is missing"});
  if (n0 && !(*n0 > 0.0)) missing.push_back({"/n0", "must be > 0"});
  if (!missing.empty()) throw ConfigError(missing);

  json out = {{"params", to_json(p)}};
  const std::int64_t n_total = p.n_total.value_or(kDefaultTotal);
  crisis::AcceleratorParams a{*p.i0, *p.k, *p.alpha, *p.beta, n_total};
  a.validate();
  const auto fp = crisis::accelerator_fixed_point(a);
  const auto st = crisis::accelerator_stability(a);
  out["accelerator"] = {{"n_fix", fp.n},
                        {"i_fix", fp.i},
                        {"exceeds_n_total", fp.n > static_cast<double>(n_total)},
                        {"stability", std::string(walras::to_string(st.stability))},
                        {"eigenvalues", st.eigenvalues},
                        {"boundary", st.boundary}};
  if (n0) out["trajectory"] = to_json(crisis::iterate_accelerator(a, *n0, max_steps, 1e-12));

  if (p.mu) {
    walras::LoanMarketParams lm;
    lm.i0 = *p.i0;
    lm.k = *p.k;
    lm.mu = *p.mu;
    lm.alpha = *p.alpha;
    lm.mode = p.returns;
    const auto lf = walras::loan_fixed_point(lm);
    const auto ls = walras::classify_stability(lm);
    out["loan_market"] = {{"n_fix", lf.n},
                          {"i_fix", lf.i},
                          {"returns", p.returns == walras::ReturnsMode::increasing ? "increasing" : "decreasing"},
                          {"stability", std::string(walras::to_string(ls.stability))},
                          {"loop_gain", ls.loop_gain},
                          {"boundary", ls.boundary}};
  }

  if (p.rho_C && *p.alpha > 0.0) {
    netacc::CombinedParams c{*p.i0, *p.k, *p.alpha, *p.beta, p.gamma.value_or(1.0), p.S.value_or(1.0),
                             *p.rho_C, n_total};
    c.validate();
    const auto fps = netacc::solve_fixed_points(c);
    json net = {{"thresholds", to_json(netacc::thresholds(c))}, {"fixed_points", to_json(fps)}};
    if (n0 && *n0 >= 1.0 && fps.regime != netacc::Regime::unclassified)
      net["phase"] = std::string(netacc::to_string(netacc::classify_phase(fps, *n0)));
    if (n0) net["trajectory"] = to_json(netacc::iterate_combined(c, *n0, max_steps, 1e-12));
    out["network"] = net;
  }
  return out;
}

}  // namespace minsky
