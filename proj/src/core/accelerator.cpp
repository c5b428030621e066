#include "minsky/core/accelerator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "minsky/core/errors.hpp"

namespace minsky::crisis {

namespace {
constexpr double kMaxLog = 709.0;
}

void AcceleratorParams::validate() const {
  if (!(i0 > 0.0) || !std::isfinite(i0)) throw ParameterError("accelerator: i0 must be positive");
  if (!(k > 0.0) || !std::isfinite(k)) throw ParameterError("accelerator: k must be positive");
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw ParameterError("accelerator: beta must be positive");
  if (!std::isfinite(alpha)) throw ParameterError("accelerator: alpha must be finite");
  if (n_total < 1) throw ParameterError("accelerator: n_total must be >= 1");
}

Step step_accelerator(double n_t, const AcceleratorParams& p) {
  if (!(n_t > 0.0)) throw ParameterError("step_accelerator: N_t must be positive");
  const double log_i = std::log(p.i0) + p.alpha * std::log(n_t);
  const double log_n = p.beta * (log_i - std::log(p.k));
  const double n = std::min(std::exp(log_n), static_cast<double>(p.n_total));
  return {std::exp(log_i), n};
}

FixedPoint accelerator_fixed_point(const AcceleratorParams& p) {
  p.validate();
  const double ab = p.alpha * p.beta;
  if (std::fabs(1.0 - ab) < 1e-12)
    throw NumericalError("accelerator: alpha*beta = 1 has no isolated fixed point");
  const double log_ratio = std::log(p.i0) - std::log(p.k);
  const double n = std::exp(p.beta / (1.0 - ab) * log_ratio);
  const double i = std::exp((std::log(p.i0) - ab * std::log(p.k)) / (1.0 - ab));
  return {n, i};
}

ClosedFormState closed_form_accelerator(const AcceleratorParams& p, double n0, int t) {
  p.validate();
  if (!(n0 > 0.0)) throw ParameterError("closed_form_accelerator: N0 must be positive");
  if (t < 0) throw ParameterError("closed_form_accelerator: t must be >= 0");
  if (t == 0) return {n0, p.i0, false, n0 > static_cast<double>(p.n_total)};

  const FixedPoint fp = accelerator_fixed_point(p);
  const double ab = p.alpha * p.beta;
  const double power = std::pow(ab, t);  // (alpha beta)^t
  const double log_n0 = std::log(n0);
  const double log_dev = log_n0 - std::log(fp.n);

  ClosedFormState out;
  double log_n = std::log(fp.n);
  if (log_dev != 0.0) log_n += power * log_dev;

  // i_t = (i0/k)^((1-(ab)^t)/(1-ab)) * k * N0^(alpha^t beta^(t-1))
  //     = (i0/k)^(...) * k * N0^((ab)^t / beta)
  const double log_i = (1.0 - power) / (1.0 - ab) * (std::log(p.i0) - std::log(p.k)) +
                       std::log(p.k) + power / p.beta * log_n0;

  if (!std::isfinite(log_n) || std::fabs(log_n) > kMaxLog) {
    const bool up = std::isnan(log_n) ? power * log_dev > 0.0 : log_n > 0.0;
    out.n = up ? std::numeric_limits<double>::infinity() : 0.0;
    out.overflow = true;
  } else {
    out.n = std::exp(log_n);
  }
  out.i = std::isfinite(log_i) && std::fabs(log_i) <= kMaxLog
              ? std::exp(log_i)
              : (log_i > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  out.exceeds_clip = out.n > static_cast<double>(p.n_total);
  return out;
}

StabilityReport accelerator_stability(const AcceleratorParams& p) {
  StabilityReport r;
  const double ab = p.alpha * p.beta;
  // Upper-triangular: eigenvalues are the diagonal entries.
  r.eigenvalues = {0.0, ab};
  r.boundary = std::fabs(std::fabs(ab) - 1.0) < 1e-12;
  r.stability =
      (std::fabs(ab) < 1.0 && !r.boundary) ? walras::Stability::stable : walras::Stability::unstable;
  return r;
}

walras::Trajectory iterate_accelerator(const AcceleratorParams& p, double n0, int max_steps,
                                       double tol) {
  p.validate();
  if (!(n0 > 0.0)) throw ParameterError("iterate_accelerator: N0 must be positive");
  walras::Trajectory traj;
  traj.tolerance = tol;
  traj.steps.push_back({0, n0, p.i0});
  double n = n0;
  for (int t = 1; t <= max_steps; ++t) {
    const Step s = step_accelerator(n, p);
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

}  // namespace minsky::crisis
