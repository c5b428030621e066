#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace minsky::walras {

enum class ReturnsMode : std::uint8_t { decreasing, increasing };
enum class StepVariant : std::uint8_t { full, damped, incremental };

/// Loan-market coefficients. Demand is N = (i/k)^-mu; supply is
/// i = i0 * N^alpha (decreasing returns) or i0 * N^-alpha (increasing).
struct LoanMarketParams {
  double i0 = 0.0;
  double k = 0.0;
  double mu = 0.0;
  double alpha = 0.0;
  ReturnsMode mode = ReturnsMode::decreasing;
  StepVariant variant = StepVariant::full;
  double step_fraction = 0.1;  // s for damped / incremental variants

  void validate() const;
  /// +alpha or -alpha depending on the returns regime.
  double supply_exponent() const;
};

enum class Termination : std::uint8_t { max_steps, converged, diverged, collapsed };
std::string_view to_string(Termination t);

struct TrajectoryPoint {
  std::int64_t t = 0;
  double n = 0.0;
  double i = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryPoint> steps;
  Termination reason = Termination::max_steps;
  double tolerance = 0.0;
  double bound = 0.0;  // the guard that fired, when diverged
};

/// Divergence guards on N; the map's infinities become reportable outcomes.
inline constexpr double kUpperGuard = 1e12;
inline constexpr double kLowerGuard = 1e-12;

/// Runs the tatonnement N_t -> i_{t+1} -> N_{t+1}. Step 0 records (N0, i0).
Trajectory iterate_loan_market(const LoanMarketParams& params, double n0, int max_steps,
                               double tol);

struct FixedPoint {
  double n = 0.0;
  double i = 0.0;
};

FixedPoint loan_fixed_point(const LoanMarketParams& params);

struct ClosedFormValue {
  double value = 0.0;
  bool overflow = false;  // value is a signed infinity sentinel
};

/// N_fix * (N0/N_fix)^((-+alpha*mu)^t), evaluated in log space. Full-step only.
ClosedFormValue closed_form_loans(const LoanMarketParams& params, double n0, int t);

enum class Stability : std::uint8_t { stable, unstable };
std::string_view to_string(Stability s);

struct StabilityReport {
  Stability stability = Stability::stable;
  double loop_gain = 0.0;  // |di/dN * dN/di| at the fixed point = alpha*mu
  bool boundary = false;   // gain exactly 1
};

StabilityReport classify_stability(const LoanMarketParams& params);

}  // namespace minsky::walras
