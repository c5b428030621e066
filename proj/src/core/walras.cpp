#include "minsky/core/walras.hpp"

#include <cmath>
#include <limits>

#include "minsky/core/errors.hpp"

namespace minsky::walras {

namespace {

constexpr double kMaxLog = 709.0;  // exp() overflows beyond this

bool positive_finite(double x) { return x > 0.0 && std::isfinite(x); }

double signed_power(double x, double p) {
  if (x == 0.0) return 0.0;
  return std::copysign(std::pow(std::fabs(x), p), x);
}

}  // namespace

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::max_steps: return "max_steps";
    case Termination::converged: return "converged";
    case Termination::diverged: return "diverged";
    case Termination::collapsed: return "collapsed";
  }
  return "?";
}

std::string_view to_string(Stability s) {
  return s == Stability::stable ? "stable" : "unstable";
}

void LoanMarketParams::validate() const {
  if (!positive_finite(i0)) throw ParameterError("loan market: i0 must be positive");
  if (!positive_finite(k)) throw ParameterError("loan market: k must be positive");
  if (!positive_finite(mu)) throw ParameterError("loan market: mu must be positive");
  if (!positive_finite(alpha)) throw ParameterError("loan market: alpha must be positive");
  if (variant != StepVariant::full && !(step_fraction > 0.0 && step_fraction <= 1.0))
    throw ParameterError("loan market: step fraction must lie in (0, 1]");
}

double LoanMarketParams::supply_exponent() const {
  return mode == ReturnsMode::decreasing ? alpha : -alpha;
}

Trajectory iterate_loan_market(const LoanMarketParams& p, double n0, int max_steps, double tol) {
  p.validate();
  if (!positive_finite(n0)) throw ParameterError("iterate_loan_market: N0 must be positive");
  if (max_steps < 0) throw ParameterError("iterate_loan_market: max_steps must be >= 0");

  Trajectory traj;
  traj.tolerance = tol;
  traj.steps.push_back({0, n0, p.i0});

  const double e = p.supply_exponent();
  const double s = p.step_fraction;
  const double log_k = std::log(p.k);
  const double log_i0 = std::log(p.i0);
  const double sign = p.mode == ReturnsMode::decreasing ? 1.0 : -1.0;

  double n_prev2 = n0;
  double n_prev = n0;
  double i_prev = p.i0;

  for (int t = 1; t <= max_steps; ++t) {
    double i_t = 0.0;
    double n_t = 0.0;
    switch (p.variant) {
      case StepVariant::full: {
        const double log_i = log_i0 + e * std::log(n_prev);
        i_t = std::exp(log_i);
        n_t = std::exp(-p.mu * (log_i - log_k));
        break;
      }
      case StepVariant::damped: {
        i_t = s * p.i0 * std::pow(n_prev, e) + (1.0 - s) * i_prev;
        n_t = s * std::pow(i_t / p.k, -p.mu) + (1.0 - s) * n_prev;
        break;
      }
      case StepVariant::incremental: {
        if (t == 1) {
          i_t = p.i0 * std::pow(n_prev, e);
        } else {
          i_t = i_prev + sign * s * signed_power(n_prev - n_prev2, p.alpha);
        }
        if (i_t > 0.0) n_t = std::pow(i_t / p.k, -p.mu);
        break;
      }
    }

    if (!(i_t > 0.0) || !std::isfinite(i_t) || std::isnan(n_t)) {
      traj.reason = Termination::collapsed;
      return traj;
    }
    traj.steps.push_back({t, n_t, i_t});
    if (!std::isfinite(n_t) || n_t > kUpperGuard) {
      traj.reason = Termination::diverged;
      traj.bound = kUpperGuard;
      return traj;
    }
    if (n_t < kLowerGuard) {
      traj.reason = Termination::diverged;
      traj.bound = kLowerGuard;
      return traj;
    }
    if (std::fabs(n_t - n_prev) <= tol * n_t) {
      traj.reason = Termination::converged;
      return traj;
    }
    n_prev2 = n_prev;
    n_prev = n_t;
    i_prev = i_t;
  }
  traj.reason = Termination::max_steps;
  return traj;
}

FixedPoint loan_fixed_point(const LoanMarketParams& p) {
  p.validate();
  const double am = p.alpha * p.mu;
  const double log_ratio = std::log(p.k) - std::log(p.i0);  // ln(k/i0)
  if (p.mode == ReturnsMode::decreasing) {
    const double n = std::exp(p.mu / (1.0 + am) * log_ratio);
    const double i = std::exp((std::log(p.i0) + am * std::log(p.k)) / (1.0 + am));
    return {n, i};
  }
  if (std::fabs(1.0 - am) < 1e-12)
    throw NumericalError("loan market: alpha*mu = 1 has no isolated fixed point (increasing returns)");
  const double n = std::exp(p.mu / (1.0 - am) * log_ratio);
  const double i = std::exp((std::log(p.i0) - am * std::log(p.k)) / (1.0 - am));
  return {n, i};
}

ClosedFormValue closed_form_loans(const LoanMarketParams& p, double n0, int t) {
  p.validate();
  if (p.variant != StepVariant::full)
    throw ParameterError("closed_form_loans: only the full-step map has a closed form");
  if (!positive_finite(n0)) throw ParameterError("closed_form_loans: N0 must be positive");
  if (t < 0) throw ParameterError("closed_form_loans: t must be >= 0");
  if (t == 0) return {n0, false};

  const FixedPoint fp = loan_fixed_point(p);
  const double base = p.mode == ReturnsMode::decreasing ? -p.alpha * p.mu : p.alpha * p.mu;
  const double log_dev = std::log(n0) - std::log(fp.n);
  if (log_dev == 0.0) return {fp.n, false};

  const double power = std::pow(base, t);
  const double log_n = std::log(fp.n) + power * log_dev;
  if (!std::isfinite(log_n) || std::fabs(log_n) > kMaxLog) {
    const bool up = std::isnan(log_n) ? power * log_dev > 0.0 : log_n > 0.0;
    return {up ? std::numeric_limits<double>::infinity() : 0.0, true};
  }
  return {std::exp(log_n), false};
}

StabilityReport classify_stability(const LoanMarketParams& p) {
  StabilityReport r;
  r.loop_gain = std::fabs(p.alpha * p.mu);
  r.boundary = std::fabs(r.loop_gain - 1.0) < 1e-12;
  r.stability = (r.loop_gain < 1.0 && !r.boundary) ? Stability::stable : Stability::unstable;
  return r;
}

}  // namespace minsky::walras
