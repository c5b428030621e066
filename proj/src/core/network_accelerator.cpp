#include "minsky/core/network_accelerator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "minsky/core/accelerator.hpp"
#include "minsky/core/errors.hpp"

namespace minsky::netacc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTangentTol = 1e-9;

bool positive_finite(double x) { return x > 0.0 && std::isfinite(x); }

crisis::AcceleratorParams ponzi_only(const CombinedParams& p) {
  return {p.i0, p.k, p.alpha, p.beta, p.n_total};
}

double ponzi_size(double i, const CombinedParams& p) {
  return std::exp(p.beta * (std::log(i) - std::log(p.k)));
}

double rate_at(double n, const CombinedParams& p) {
  return std::exp(std::log(p.i0) + p.alpha * std::log(n));
}

// min of both branches and the population, no percolation sentinel games.
double min_map(double n, const CombinedParams& p) {
  const double i = rate_at(n, p);
  return std::min({percolation_size(i, p), ponzi_size(i, p), static_cast<double>(p.n_total)});
}

// Bisection on ln x for a sign change of f over [lo, hi].
template <class F>
double bisect_log(F&& f, double lo, double hi, const char* what) {
  double flo = f(lo);
  const double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) {
    std::ostringstream os;
    os << what << ": bracket [" << lo << ", " << hi << "] does not straddle a root";
    throw NumericalError(os.str());
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (hi / lo - 1.0 <= 4e-16 || mid <= lo || mid >= hi) return mid;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  if (hi / lo - 1.0 <= 1e-12) return std::sqrt(lo * hi);
  std::ostringstream os;
  os << what << ": no convergence after 200 bisection steps, bracket [" << lo << ", " << hi << "]";
  throw NumericalError(os.str());
}

// Junctions of the percolation and ponzi branches in u = (i/i_C)^beta.
// ln P - ln Q = ln S - gamma ln(1-u) - ln u - ln N_safe is convex in u with
// its minimum at u = 1/(1+gamma), so there are zero or two crossings.
struct Junctions {
  bool exist = false;
  double u_lo = 0.0;
  double u_hi = 0.0;
  double u_min = 0.0;
};

Junctions junctions(const CombinedParams& p) {
  const double n_safe = p.rho_C * static_cast<double>(p.n_total);
  auto h = [&](double u) {
    return std::log(p.S) - p.gamma * std::log1p(-u) - std::log(u) - std::log(n_safe);
  };
  Junctions j;
  j.u_min = 1.0 / (1.0 + p.gamma);
  if (h(j.u_min) >= 0.0) return j;
  j.exist = true;

  // Upper crossing solved in the complement w = 1-u to keep precision near i_C.
  auto h_w = [&](double w) {
    return std::log(p.S) - p.gamma * std::log(w) - std::log1p(-w) - std::log(n_safe);
  };
  double gap = 1.0 - j.u_min;
  while (h_w(gap) < 0.0 && gap > 1e-300) gap *= 0.5;
  const double w = bisect_log([&](double x) { return -h_w(x); }, gap, 1.0 - j.u_min, "junction");
  j.u_hi = 1.0 - w;

  double low = j.u_min;
  while (h(low) < 0.0 && low > 1e-300) low *= 0.5;
  j.u_lo = bisect_log(h, low, j.u_min, "junction");
  return j;
}

}  // namespace

double CombinedParams::i_C() const {
  return k * std::pow(rho_C * static_cast<double>(n_total), 1.0 / beta);
}

double CombinedParams::r_max() const {
  return k * std::pow(static_cast<double>(n_total), 1.0 / beta);
}

void CombinedParams::validate() const {
  if (!positive_finite(i0)) throw ParameterError("combined: i0 must be positive");
  if (!positive_finite(k)) throw ParameterError("combined: k must be positive");
  if (!positive_finite(beta)) throw ParameterError("combined: beta must be positive");
  if (!positive_finite(gamma)) throw ParameterError("combined: gamma must be positive");
  if (!positive_finite(S)) throw ParameterError("combined: S must be positive");
  if (!std::isfinite(alpha)) throw ParameterError("combined: alpha must be finite");
  if (!(rho_C > 0.0 && rho_C < 1.0)) throw ParameterError("combined: rho_C must lie in (0, 1)");
  if (n_total < 1) throw ParameterError("combined: n_total must be >= 1");
}

double rate_from_density(double rho, const CombinedParams& p) {
  return p.k * std::pow(rho * static_cast<double>(p.n_total), 1.0 / p.beta);
}

double density_from_rate(double i, const CombinedParams& p) {
  return ponzi_size(i, p) / static_cast<double>(p.n_total);
}

double percolation_size(double i, const CombinedParams& p) {
  const double u = std::exp(p.beta * (std::log(i) - std::log(p.i_C())));
  if (u >= 1.0) return kInf;
  return p.S * std::exp(-p.gamma * std::log1p(-u));
}

Step step_combined(double n_t, const CombinedParams& p, bool percolation) {
  if (!(n_t > 0.0)) throw ParameterError("step_combined: N_t must be positive");
  const auto s = crisis::step_accelerator(n_t, ponzi_only(p));
  if (!percolation) return {s.i_next, s.n_next};
  return {s.i_next, std::min(s.n_next, percolation_size(s.i_next, p))};
}

walras::Trajectory iterate_combined(const CombinedParams& p, double n0, int max_steps, double tol,
                                    bool percolation) {
  p.validate();
  if (!(n0 > 0.0)) throw ParameterError("iterate_combined: N0 must be positive");
  walras::Trajectory traj;
  traj.tolerance = tol;
  traj.steps.push_back({0, n0, p.i0});
  double n = n0;
  for (int t = 1; t <= max_steps; ++t) {
    const Step s = step_combined(n, p, percolation);
    traj.steps.push_back({t, s.n_next, s.i_next});
    if (s.n_next < walras::kLowerGuard) {
      traj.reason = walras::Termination::diverged;
      traj.bound = walras::kLowerGuard;
      return traj;
    }
    if (std::fabs(s.n_next - n) <= tol * s.n_next) {
      traj.reason = walras::Termination::converged;
      return traj;
    }
    n = s.n_next;
  }
  traj.reason = walras::Termination::max_steps;
  return traj;
}

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::all_three: return "all_three";
    case Regime::only_core: return "only_core";
    case Regime::only_conv: return "only_conv";
    case Regime::tangent_conv_div: return "tangent_conv_div";
    case Regime::tangent_div_core: return "tangent_div_core";
    case Regime::unclassified: return "unclassified";
  }
  return "?";
}

std::string_view to_string(Phase ph) {
  switch (ph) {
    case Phase::micro_crisis: return "micro_crisis";
    case Phase::stable: return "stable";
    case Phase::minsky_instability: return "minsky_instability";
    case Phase::solid_core: return "solid_core";
  }
  return "?";
}

std::vector<double> percolation_roots_bisection(const CombinedParams& p) {
  p.validate();
  if (!(p.alpha > 0.0)) throw ParameterError("percolation roots: alpha must be positive");
  const double ab = p.ab(), abg = p.abg();
  const double ln_a = p.beta * (std::log(p.i0) - std::log(p.i_C()));
  const double s_g = std::pow(p.S, 1.0 / p.gamma);
  // Work in x = a N^ab so the top of the branch (i = i_C) is exactly x = 1;
  // in N the factor a N^ab - 1 cancels badly once N is large.
  auto F = [&](double x) { return std::exp((std::log(x) - ln_a) / abg) * (x - 1.0) + s_g; };
  auto n_of = [&](double x) { return std::exp((std::log(x) - ln_a) / ab); };
  // F' = 0 at x = 1/(1 + ab gamma).
  const double x_turn = 1.0 / (1.0 + abg);
  const double f_turn = F(x_turn);
  if (f_turn > 0.0) return {};
  if (f_turn == 0.0) return {n_of(x_turn)};
  const double x_s = std::exp(ln_a + ab * std::log(p.S));
  const double lo = bisect_log(F, std::min(x_s, x_turn), x_turn, "percolation root (lower)");
  const double hi = bisect_log(F, x_turn, 1.0, "percolation root (upper)");
  return {n_of(lo), n_of(hi)};
}

std::vector<double> percolation_roots_quadratic(const CombinedParams& p) {
  p.validate();
  if (std::fabs(p.abg() - 1.0) > kTangentTol)
    throw ParameterError("quadratic roots need alpha*beta*gamma = 1");
  const double a = std::exp(p.beta * (std::log(p.i0) - std::log(p.i_C())));
  const double c = a * std::pow(p.S, 1.0 / p.gamma);
  const double disc = 1.0 - 4.0 * c;
  if (disc < 0.0) return {};
  const double sq = std::sqrt(disc);
  // Smaller root written as 2/(1+sq) to avoid cancellation.
  const double lo = p.S * std::pow(2.0 / (1.0 + sq), p.gamma);
  const double hi = p.S * std::pow((1.0 + sq) / (2.0 * c), p.gamma);
  if (sq == 0.0) return {lo, lo};
  return {lo, hi};
}

std::vector<double> percolation_roots(const CombinedParams& p) {
  if (std::fabs(p.abg() - 1.0) <= kTangentTol) return percolation_roots_quadratic(p);
  return percolation_roots_bisection(p);
}

Thresholds thresholds(const CombinedParams& p) {
  p.validate();
  Thresholds t;
  const double ab = p.ab(), abg = p.abg();
  const double n = static_cast<double>(p.n_total);
  t.i_C = p.i_C();
  t.n_safe = p.rho_C * n;
  t.i_safe = t.i_C * std::pow(p.k / t.i_C, ab);
  t.rho_safe = p.rho_C * std::pow(p.rho_C * n, -ab);
  if (abg > 0.0) {
    t.n_0C = p.S * std::pow(1.0 + 1.0 / abg, p.gamma);
    t.i_0C = t.i_C / (std::pow(p.S, p.alpha) * std::pow(1.0 + abg, 1.0 / p.beta) *
                      std::pow(1.0 + 1.0 / abg, p.alpha * p.gamma));
    t.rho_0C = density_from_rate(t.i_0C, p);
  } else {
    t.n_0C = t.i_0C = t.rho_0C = std::numeric_limits<double>::quiet_NaN();
  }
  if (p.alpha > 0.0) {
    const Junctions j = junctions(p);
    if (j.exist) {
      const double n_j = j.u_hi * t.n_safe;           // ponzi count at the junction
      const double i_j = t.i_C * std::pow(j.u_hi, 1.0 / p.beta);
      t.n_safe_exact = n_j;
      t.i_safe_exact = i_j / std::pow(n_j, p.alpha);  // i0 whose rate at N_J is i_J
    }
  }
  return t;
}

FixedPointSet solve_fixed_points(const CombinedParams& p) {
  p.validate();
  if (!(p.alpha > 0.0)) throw ParameterError("solve_fixed_points: alpha must be positive");
  FixedPointSet out;
  const double ab = p.ab(), abg = p.abg();
  const double n_cap = static_cast<double>(p.n_total);
  out.quadratic = std::fabs(abg - 1.0) <= kTangentTol;
  const auto roots = percolation_roots(p);
  const Junctions junc = junctions(p);
  const double i_c = p.i_C();

  auto on_min_curve = [&](double n, double value_here) {
    return value_here <= min_map(n, p) * (1.0 + 1e-10);
  };

  for (double n : roots) {
    if (!(n <= n_cap)) continue;
    const double i = rate_at(n, p);
    if (!(n <= ponzi_size(i, p) * (1.0 + 1e-10))) continue;
    const double u = std::exp(p.beta * (std::log(i) - std::log(i_c)));
    FixedPointInfo fp{n, i, Branch::percolation, abg * u / (1.0 - u), false};
    fp.stable = std::fabs(fp.log_slope) < 1.0;
    if (!out.points.empty() && std::fabs(out.points.back().n - n) <= 1e-12 * n) continue;
    out.points.push_back(fp);
  }

  bool q_root_is_core = false;
  if (std::fabs(1.0 - ab) > 1e-12) {
    const double nq = std::exp(p.beta / (1.0 - ab) * (std::log(p.i0) - std::log(p.k)));
    if (nq <= n_cap && std::isfinite(nq) && nq > 0.0) {
      const double i = rate_at(nq, p);
      if (on_min_curve(nq, nq)) {
        FixedPointInfo fp{nq, i, Branch::ponzi, ab, std::fabs(ab) < 1.0};
        out.points.push_back(fp);
        const double u = std::exp(p.beta * (std::log(i) - std::log(i_c)));
        q_root_is_core = junc.exist ? u >= junc.u_hi * (1.0 - 1e-12) : u >= junc.u_min;
      }
    }
  }
  // Population cap acts as a fixed point when both branches exceed it.
  {
    const double i = rate_at(n_cap, p);
    if (std::min(percolation_size(i, p), ponzi_size(i, p)) >= n_cap) {
      bool dup = false;
      for (const auto& fp : out.points) dup = dup || std::fabs(fp.n - n_cap) <= 1e-12 * n_cap;
      if (!dup) out.points.push_back({n_cap, i, Branch::cap, 0.0, true});
    }
  }
  std::sort(out.points.begin(), out.points.end(),
            [](const auto& a, const auto& b) { return a.n < b.n; });

  for (const auto& fp : out.points) {
    const bool core_like =
        fp.branch == Branch::cap || (fp.branch == Branch::ponzi && q_root_is_core);
    if (fp.stable && core_like) {
      if (!out.n_core) out.n_core = fp.n;
    } else if (fp.stable) {
      if (!out.n_conv) out.n_conv = fp.n;
    } else if (fp.branch == Branch::percolation) {
      out.n_div = fp.n;
    }
  }

  if (!(ab < 1.0)) {
    out.regime = Regime::unclassified;
    return out;
  }

  const Thresholds thr = thresholds(p);
  if (std::fabs(p.i0 - thr.i_0C) <= kTangentTol * thr.i_0C) {
    out.regime = Regime::tangent_conv_div;
    const double merged = out.quadratic ? p.S * std::pow(2.0, p.gamma) : thr.n_0C;
    out.n_conv = merged;
    out.n_div = merged;
    return out;
  }
  if (thr.i_safe_exact && std::fabs(p.i0 - *thr.i_safe_exact) <= kTangentTol * *thr.i_safe_exact) {
    out.regime = Regime::tangent_div_core;
    out.n_div = *thr.n_safe_exact;
    out.n_core = *thr.n_safe_exact;
    return out;
  }
  if (out.n_conv && out.n_div && out.n_core)
    out.regime = Regime::all_three;
  else if (out.n_core && !out.n_conv)
    out.regime = Regime::only_core;
  else if (out.n_conv && !out.n_core)
    out.regime = Regime::only_conv;
  else
    out.regime = Regime::unclassified;
  return out;
}

Phase classify_phase(const FixedPointSet& fps, double n0) {
  if (!(n0 >= 1.0)) throw ParameterError("classify_phase: N0 must be >= 1");
  switch (fps.regime) {
    case Regime::all_three:
      if (n0 < *fps.n_conv) return Phase::micro_crisis;
      if (n0 < *fps.n_div) return Phase::stable;
      if (n0 < *fps.n_core) return Phase::minsky_instability;
      return Phase::solid_core;
    case Regime::only_core:
      return n0 < *fps.n_core ? Phase::minsky_instability : Phase::solid_core;
    case Regime::only_conv:
      return n0 < *fps.n_conv ? Phase::micro_crisis : Phase::stable;
    case Regime::tangent_conv_div:
      // Semi-stable merged point: attracts from below, repels above.
      if (n0 < *fps.n_conv) return Phase::micro_crisis;
      if (n0 == *fps.n_conv) return Phase::stable;
      if (!fps.n_core || n0 < *fps.n_core) return Phase::minsky_instability;
      return Phase::solid_core;
    case Regime::tangent_div_core:
      if (fps.n_conv && n0 < *fps.n_conv) return Phase::micro_crisis;
      if (n0 < *fps.n_div) return Phase::stable;
      return Phase::solid_core;
    case Regime::unclassified:
      break;
  }
  throw NumericalError("classify_phase: parameters outside the four-phase structure");
}

Phase classify_phase(const CombinedParams& p, double n0) {
  if (!(p.ab() < 1.0))
    throw ParameterError("classify_phase: alpha*beta >= 1 has no four-phase structure");
  return classify_phase(solve_fixed_points(p), n0);
}

bool heads_to_core(Phase ph) {
  return ph == Phase::minsky_instability || ph == Phase::solid_core;
}

PhaseGrid phase_diagram(const CombinedParams& base, const GridSpec& grid) {
  base.validate();
  if (!(base.ab() < 1.0))
    throw ParameterError("phase_diagram: alpha*beta >= 1 is not supported");
  if (grid.n0_count < 1 || grid.y_count < 1)
    throw ParameterError("phase_diagram: grid counts must be >= 1");
  if (!(grid.n0_min >= 1.0) || !(grid.n0_max >= grid.n0_min))
    throw ParameterError("phase_diagram: need 1 <= n0_min <= n0_max");
  if (!positive_finite(grid.y_min) || !(grid.y_max >= grid.y_min) || !std::isfinite(grid.y_max))
    throw ParameterError("phase_diagram: need 0 < y_min <= y_max");
  if (grid.axis == PhaseAxis::rho0 && !(grid.y_max < 1.0))
    throw ParameterError("phase_diagram: rho0 must stay below 1");

  auto axis = [&](double lo, double hi, int count, int idx) {
    if (count == 1) return lo;
    const double f = static_cast<double>(idx) / (count - 1);
    if (grid.log_spacing) return std::exp(std::log(lo) + f * (std::log(hi) - std::log(lo)));
    return lo + f * (hi - lo);
  };

  PhaseGrid out;
  out.spec = grid;
  out.thresholds = thresholds(base);
  for (int x = 0; x < grid.n0_count; ++x) out.n0.push_back(axis(grid.n0_min, grid.n0_max, grid.n0_count, x));

  for (int y = 0; y < grid.y_count; ++y) {
    PhaseRow row;
    row.y = axis(grid.y_min, grid.y_max, grid.y_count, y);
    CombinedParams p = base;
    p.i0 = grid.axis == PhaseAxis::i0 ? row.y : rate_from_density(row.y, base);
    row.i0 = p.i0;
    row.fixed_points = solve_fixed_points(p);
    row.percolation_roots = percolation_roots(p);
    row.labels.reserve(out.n0.size());
    for (double n0 : out.n0) row.labels.push_back(classify_phase(row.fixed_points, n0));
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace minsky::netacc
