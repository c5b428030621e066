#pragma once

#include <array>
#include <cstdint>

#include "minsky/core/walras.hpp"

namespace minsky::crisis {

/// Non-network crisis accelerator: N_t -> i_{t+1} = i0 N_t^alpha ->
/// N_{t+1} = min((i_{t+1}/k)^beta, n_total).
struct AcceleratorParams {
  double i0 = 0.0;
  double k = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  std::int64_t n_total = 0;

  void validate() const;
};

struct Step {
  double i_next = 0.0;
  double n_next = 0.0;
};

Step step_accelerator(double n_t, const AcceleratorParams& params);

struct FixedPoint {
  double n = 0.0;
  double i = 0.0;
};

/// N_fix = (i0/k)^(beta/(1-alpha beta)), i_fix = (i0 / k^(alpha beta))^(1/(1-alpha beta)).
/// Unclipped; compare with n_total yourself.
FixedPoint accelerator_fixed_point(const AcceleratorParams& params);

struct ClosedFormState {
  double n = 0.0;
  double i = 0.0;
  bool overflow = false;      // signed-infinity sentinel in n
  bool exceeds_clip = false;  // n > n_total: the clipped iteration departs from this value
};

/// N_t = N_fix (N0/N_fix)^((alpha beta)^t), i_t from the summed geometric
/// exponent form. t = 0 returns (N0, i0).
ClosedFormState closed_form_accelerator(const AcceleratorParams& params, double n0, int t);

struct StabilityReport {
  walras::Stability stability = walras::Stability::stable;
  std::array<double, 2> eigenvalues{};  // of the log-space transition matrix [[0, a], [0, a b]]
  bool boundary = false;
};

StabilityReport accelerator_stability(const AcceleratorParams& params);

/// Iterates step_accelerator from n0, recording (t, N_t, i_t); i_0 is the
/// pre-shock rate. Stops on convergence (relative tol), guard, or max_steps.
walras::Trajectory iterate_accelerator(const AcceleratorParams& params, double n0, int max_steps,
                                       double tol);

}  // namespace minsky::crisis
