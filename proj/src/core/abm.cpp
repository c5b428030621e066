#include "minsky/core/abm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "minsky/core/errors.hpp"
#include "minsky/core/rng.hpp"

namespace minsky::abm {

namespace {

Edge normalized(Edge e) { return {std::min(e.first, e.second), std::max(e.first, e.second)}; }

// Stream ids for the sub-seeds of one run.
enum : std::uint64_t { kNetworkStream = 1, kResilienceStream = 2, kRankStream = 3, kSeedStream = 4 };

void check_nodes(const perc::Network& net, const std::vector<NodeId>& ids, const char* what) {
  for (NodeId u : ids)
    if (!net.contains(u))
      throw ParameterError(std::string(what) + ": node " + std::to_string(u) + " does not exist");
}

void check_edges(const perc::Network& net, const std::vector<Edge>& edges, const char* what) {
  for (auto [u, v] : edges)
    if (!net.has_edge(u, v))
      throw ParameterError(std::string(what) + ": edge (" + std::to_string(u) + ", " +
                           std::to_string(v) + ") does not exist");
}

void add_guarantees(SimState& s, const std::vector<Edge>& edges) {
  for (auto e : edges) s.guaranteed.push_back(normalized(e));
  std::sort(s.guaranteed.begin(), s.guaranteed.end());
  s.guaranteed.erase(std::unique(s.guaranteed.begin(), s.guaranteed.end()), s.guaranteed.end());
}

double rule_rate(const SimState& s) {
  const double a = std::fabs(s.policy.alpha);
  const double cumulative = static_cast<double>(s.cumulative_failed);
  const double last = static_cast<double>(s.per_tick_failures.back());
  const double n = s.driver == RateDriver::cumulative ? cumulative : last;
  switch (s.policy.rule) {
    case RateRule::procyclical: return econ::interest_from_failures(n, {s.i0, a});
    case RateRule::counter_cyclical: return econ::interest_from_failures(n, {s.i0, -a});
    case RateRule::self_regulating: return s.i0 * std::pow(std::max(last, 1.0), -a);
    case RateRule::manual_override: return s.policy.manual_rate;
  }
  return s.i0;
}

}  // namespace

std::string_view to_string(RateRule r) {
  switch (r) {
    case RateRule::procyclical: return "procyclical";
    case RateRule::counter_cyclical: return "counter_cyclical";
    case RateRule::self_regulating: return "self_regulating";
    case RateRule::manual_override: return "manual_override";
  }
  return "?";
}

std::string_view to_string(RateDriver d) {
  return d == RateDriver::cumulative ? "cumulative" : "per_tick";
}

void PolicySpec::validate() const {
  if (!std::isfinite(alpha)) throw ParameterError("policy: alpha must be finite");
  if (rule == RateRule::manual_override && !(manual_rate > 0.0 && std::isfinite(manual_rate)))
    throw ParameterError("policy: manual_override needs a positive rate");
  if (floor && !(*floor > 0.0 && std::isfinite(*floor)))
    throw ParameterError("policy: rate floor must be positive");
}

std::string_view kind_name(const Intervention& iv) {
  switch (iv.index()) {
    case 0: return "immunize_nodes";
    case 1: return "guarantee_edges";
    case 2: return "set_rate";
    case 3: return "set_policy";
  }
  return "?";
}

bool SimState::is_guaranteed(NodeId u, NodeId v) const {
  return std::binary_search(guaranteed.begin(), guaranteed.end(), normalized({u, v}));
}

SimState init_scenario(const SimConfig& c) {
  if (!(c.i0 > 0.0) || !std::isfinite(c.i0)) throw ParameterError("scenario: i0 must be positive");
  if (c.ticks < 0) throw ParameterError("scenario: ticks must be >= 0");
  c.policy.validate();

  perc::GeneratorSpec gspec = c.network;
  gspec.seed = derive_seed(c.seed, kNetworkStream);
  auto net = std::make_shared<const perc::Network>(perc::build_network(gspec));
  if (net->n_nodes() < 1) throw ParameterError("scenario: network has no nodes");

  check_nodes(*net, c.seeds, "seeds");
  check_nodes(*net, c.immunized, "immunized");
  check_edges(*net, c.guaranteed_edges, "guaranteed_edges");
  if (c.random_seeds < 0 || c.random_seeds > net->n_nodes())
    throw ParameterError("scenario: random_seeds out of range");

  econ::ResilienceSpec rs = c.resilience;
  rs.n_total = net->n_nodes();
  rs.seed = derive_seed(c.seed, kResilienceStream);
  econ::FirmTable base = econ::sample_resiliences(rs);
  if (rs.mode == econ::ResilienceMode::rank_deterministic && c.shuffle_ranks) {
    std::vector<econ::Firm> firms(base.firms().begin(), base.firms().end());
    std::vector<double> r = base.resiliences();
    Rng rng(derive_seed(c.seed, kRankStream));
    rng.shuffle(r);
    for (std::size_t j = 0; j < firms.size(); ++j) firms[j].resilience = r[j];
    base = econ::FirmTable(std::move(firms));
  }

  std::vector<NodeId> seeds = c.seeds;
  if (c.random_seeds > 0) {
    std::vector<NodeId> all(static_cast<std::size_t>(net->n_nodes()));
    std::iota(all.begin(), all.end(), NodeId{0});
    Rng rng(derive_seed(c.seed, kSeedStream));
    rng.shuffle(all);
    seeds.insert(seeds.end(), all.begin(), all.begin() + c.random_seeds);
  }
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());

  SimState s;
  s.network = net;
  s.i0 = c.i0;
  s.i_current = c.i0;
  s.policy = c.policy;
  s.driver = c.driver;
  s.seed = c.seed;
  add_guarantees(s, c.guaranteed_edges);

  econ::FirmTable firms = base.with_immunized(c.immunized).with_failed(seeds);
  s.firms = econ::classify_firms(firms, c.i0);
  s.cumulative_failed = static_cast<std::int64_t>(s.firms.count(econ::FirmStatus::failed));
  s.per_tick_failures.push_back(s.cumulative_failed);
  s.ponzi_series.push_back(static_cast<std::int64_t>(s.firms.count(econ::FirmStatus::ponzi)));
  s.rate_series.push_back(c.i0);
  return s;
}

TickDelta advance(SimState& s) {
  TickDelta d;
  d.tick = s.tick + 1;
  for (const auto& l : s.log)
    if (l.tick == s.tick) d.applied_interventions.push_back(l);

  // (1) rate
  double rate = 0.0;
  if (s.pending_rate) {
    rate = *s.pending_rate;
    s.pending_rate.reset();
  } else {
    rate = rule_rate(s);
  }
  if (s.policy.floor) rate = std::max(rate, *s.policy.floor);

  // (2) reclassify
  const econ::FirmTable before = s.firms;
  econ::FirmTable now = econ::classify_firms(before, rate);
  for (std::size_t j = 0; j < now.size(); ++j) {
    const auto was = before[j].status, is = now[j].status;
    if (was == econ::FirmStatus::viable && is == econ::FirmStatus::ponzi)
      d.new_ponzi.push_back(static_cast<NodeId>(j));
    else if (was == econ::FirmStatus::ponzi && is == econ::FirmStatus::viable)
      d.recovered.push_back(static_cast<NodeId>(j));
  }

  // (3) one synchronous contagion sweep from the failures present at the start of the sweep
  const auto& net = *s.network;
  std::vector<char> hit(now.size(), 0);
  for (std::size_t j = 0; j < now.size(); ++j) {
    if (now[j].status != econ::FirmStatus::failed) continue;
    const auto u = static_cast<NodeId>(j);
    for (NodeId v : net.neighbors(u)) {
      const auto& f = now[static_cast<std::size_t>(v)];
      if (hit[v] || f.status != econ::FirmStatus::ponzi || f.immunized) continue;
      if (!s.guaranteed.empty() && s.is_guaranteed(u, v)) continue;
      hit[v] = 1;
      d.new_failures.push_back(v);
    }
  }
  std::sort(d.new_failures.begin(), d.new_failures.end());
  if (!d.new_failures.empty()) now = now.with_failed(d.new_failures);

  s.firms = std::move(now);
  s.tick = d.tick;
  s.i_current = rate;
  const auto fresh = static_cast<std::int64_t>(d.new_failures.size());
  s.cumulative_failed += fresh;
  s.per_tick_failures.push_back(fresh);
  s.ponzi_series.push_back(static_cast<std::int64_t>(s.firms.count(econ::FirmStatus::ponzi)));
  s.rate_series.push_back(rate);
  d.i_current = rate;
  return d;
}

SimState tick(SimState state) {
  advance(state);
  return state;
}

void apply_intervention(SimState& s, const Intervention& iv) {
  const auto& net = *s.network;
  if (auto* im = std::get_if<ImmunizeNodes>(&iv)) {
    check_nodes(net, im->ids, "immunize_nodes");
    s.firms = s.firms.with_immunized(im->ids);
  } else if (auto* ge = std::get_if<GuaranteeEdges>(&iv)) {
    check_edges(net, ge->edges, "guarantee_edges");
    add_guarantees(s, ge->edges);
  } else if (auto* sr = std::get_if<SetRate>(&iv)) {
    if (!(sr->rate > 0.0) || !std::isfinite(sr->rate))
      throw ParameterError("set_rate: rate must be positive");
    s.pending_rate = sr->rate;
  } else if (auto* sp = std::get_if<SetPolicy>(&iv)) {
    sp->policy.validate();
    s.policy = sp->policy;
    s.pending_rate.reset();
  }
  s.log.push_back({s.tick, iv});
}

SimState run_scenario(const SimConfig& c) {
  SimState s = init_scenario(c);
  while (s.tick < c.ticks) {
    for (const auto& l : c.scheduled)
      if (l.tick == s.tick) apply_intervention(s, l.intervention);
    advance(s);
  }
  return s;
}

SimState replay(const SimConfig& c, const std::vector<LoggedIntervention>& log,
                std::int64_t until_tick) {
  SimState s = init_scenario(c);
  std::size_t next = 0;
  while (true) {
    while (next < log.size() && log[next].tick == s.tick) apply_intervention(s, log[next++].intervention);
    if (s.tick >= until_tick) break;
    advance(s);
  }
  return s;
}

Bottleneck find_bottleneck(const std::vector<double>& series, int window, double threshold) {
  Bottleneck b;
  const auto n = static_cast<std::int64_t>(series.size());
  if (n < 3) return b;
  window = std::max(window, 1);
  const int half = window / 2;
  std::vector<double> sm(series.size());
  std::vector<double> buf;
  for (std::int64_t t = 0; t < n; ++t) {
    buf.clear();
    for (std::int64_t j = std::max<std::int64_t>(0, t - half); j <= std::min(n - 1, t + half); ++j)
      buf.push_back(series[j]);
    std::nth_element(buf.begin(), buf.begin() + buf.size() / 2, buf.end());
    sm[t] = buf[buf.size() / 2];
  }
  // prefix / suffix maxima
  std::vector<double> pre(sm.size()), suf(sm.size());
  pre[0] = sm[0];
  for (std::int64_t t = 1; t < n; ++t) pre[t] = std::max(pre[t - 1], sm[t]);
  suf[n - 1] = sm[n - 1];
  for (std::int64_t t = n - 2; t >= 0; --t) suf[t] = std::max(suf[t + 1], sm[t]);

  for (std::int64_t t = 1; t + 1 < n; ++t) {
    if (sm[t] > threshold) continue;
    if (!(pre[t - 1] > sm[t] && suf[t + 1] > sm[t])) continue;
    if (!b.fired || sm[t] < b.value) {
      b.fired = true;
      b.tick = t;
      b.value = sm[t];
    }
  }
  return b;
}

EnsembleStats run_ensemble(const SimConfig& config, int n_runs, bool reseed) {
  if (n_runs < 2) throw ParameterError("ensemble: n_runs must be >= 2");
  EnsembleStats st;
  const auto len = static_cast<std::size_t>(config.ticks + 1);
  std::vector<double> sum(len, 0.0), sum2(len, 0.0), csum(len, 0.0), csum2(len, 0.0);
  for (int r = 0; r < n_runs; ++r) {
    SimConfig c = config;
    if (reseed) c.seed = derive_seed(config.seed, static_cast<std::uint64_t>(r));
    const SimState s = run_scenario(c);
    std::int64_t cum = 0;
    for (std::size_t t = 0; t < len; ++t) {
      const double x = static_cast<double>(s.per_tick_failures[t]);
      cum += s.per_tick_failures[t];
      sum[t] += x;
      sum2[t] += x * x;
      csum[t] += static_cast<double>(cum);
      csum2[t] += static_cast<double>(cum) * static_cast<double>(cum);
    }
    st.final_failures.push_back(s.cumulative_failed);
  }
  const double n = n_runs;
  auto var = [n](double s, double s2) { return std::max(0.0, (s2 - s * s / n) / (n - 1.0)); };
  for (std::size_t t = 0; t < len; ++t) {
    st.mean_per_tick.push_back(sum[t] / n);
    st.variance_per_tick.push_back(var(sum[t], sum2[t]));
    st.mean_cumulative.push_back(csum[t] / n);
    st.variance_cumulative.push_back(var(csum[t], csum2[t]));
  }
  const auto stats = perc::summarize(st.final_failures);
  st.mean_final = stats.mean;
  st.cv_final = stats.cv;
  st.bottleneck = find_bottleneck(st.mean_per_tick);
  return st;
}

}  // namespace minsky::abm
