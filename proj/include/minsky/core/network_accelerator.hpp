#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "minsky/core/walras.hpp"

namespace minsky::netacc {

/// Coefficients of the combined map. i_C and r_max are always derived.
struct CombinedParams {
  double i0 = 0.0;
  double k = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 1.0;
  double S = 1.0;
  double rho_C = 0.5;
  std::int64_t n_total = 0;

  double i_C() const;    // k (rho_C n_total)^(1/beta)
  double r_max() const;  // k n_total^(1/beta)
  double ab() const { return alpha * beta; }
  double abg() const { return alpha * beta * gamma; }
  void validate() const;
};

/// rho <-> i via (i/k)^beta = rho n_total.
double rate_from_density(double rho, const CombinedParams& p);
double density_from_rate(double i, const CombinedParams& p);

/// S (1 - (i/i_C)^beta)^-gamma, +inf for i >= i_C.
double percolation_size(double i, const CombinedParams& p);

struct Step {
  double i_next = 0.0;
  double n_next = 0.0;
};

/// N -> i = i0 N^alpha -> min(percolation_size(i), (i/k)^beta, n_total).
/// With percolation = false the map is exactly the non-network accelerator.
Step step_combined(double n_t, const CombinedParams& p, bool percolation = true);

walras::Trajectory iterate_combined(const CombinedParams& p, double n0, int max_steps, double tol,
                                    bool percolation = true);

enum class Regime : std::uint8_t {
  all_three,
  only_core,
  only_conv,
  tangent_conv_div,
  tangent_div_core,
  unclassified,  // alpha*beta >= 1 or no attractor structure of the four-phase kind
};
std::string_view to_string(Regime r);

enum class Branch : std::uint8_t { percolation, ponzi, cap };

struct FixedPointInfo {
  double n = 0.0;
  double i = 0.0;
  Branch branch = Branch::percolation;
  double log_slope = 0.0;  // d ln N_{t+1} / d ln N_t
  bool stable = false;
};

struct FixedPointSet {
  std::optional<double> n_conv;
  std::optional<double> n_div;
  std::optional<double> n_core;
  Regime regime = Regime::unclassified;
  std::vector<FixedPointInfo> points;  // every fixed point of the min map, ascending
  bool quadratic = false;              // alpha beta gamma = 1 closed form used
};

/// Roots of F(N) = a N^(ab + 1/g) - N^(1/g) + S^(1/g) with a = (i0/i_C)^beta,
/// i.e. fixed points of the percolation branch alone, ascending. Empty when
/// F has no root.
std::vector<double> percolation_roots_bisection(const CombinedParams& p);
/// Same roots from the quadratic in N^(1/gamma); requires alpha beta gamma = 1.
std::vector<double> percolation_roots_quadratic(const CombinedParams& p);
/// Dispatches on alpha beta gamma.
std::vector<double> percolation_roots(const CombinedParams& p);

FixedPointSet solve_fixed_points(const CombinedParams& p);

struct Thresholds {
  double i_C = 0.0;
  double i_safe = 0.0;  // junction approximated at i = i_C
  double n_safe = 0.0;
  double rho_safe = 0.0;
  double i_0C = 0.0;
  double n_0C = 0.0;
  double rho_0C = 0.0;
  // Exact junction of the percolation and ponzi branches just below i_C.
  std::optional<double> i_safe_exact;
  std::optional<double> n_safe_exact;
};

Thresholds thresholds(const CombinedParams& p);

enum class Phase : std::uint8_t { micro_crisis, stable, minsky_instability, solid_core };
std::string_view to_string(Phase ph);

/// Label from the fixed-point set alone. Requires alpha beta < 1.
Phase classify_phase(const FixedPointSet& fps, double n0);
Phase classify_phase(const CombinedParams& p, double n0);

/// True when the phase's attractor is n_core (instability, solid core).
bool heads_to_core(Phase ph);

enum class PhaseAxis : std::uint8_t { i0, rho0 };

struct GridSpec {
  double n0_min = 1.0, n0_max = 1e4;
  int n0_count = 100;
  double y_min = 0.0, y_max = 0.0;  // i0 or rho0
  int y_count = 100;
  bool log_spacing = true;
  PhaseAxis axis = PhaseAxis::i0;
};

struct PhaseRow {
  double y = 0.0;   // i0 or rho0 as given on the axis
  double i0 = 0.0;  // converted
  FixedPointSet fixed_points;
  std::vector<double> percolation_roots;  // network curves, valid or not
  std::vector<Phase> labels;
};

struct PhaseGrid {
  GridSpec spec;
  std::vector<double> n0;
  std::vector<PhaseRow> rows;
  Thresholds thresholds;  // at the base params
};

PhaseGrid phase_diagram(const CombinedParams& base, const GridSpec& grid);

}  // namespace minsky::netacc
