#include <doctest.h>

#include <cmath>
#include <random>

#include "minsky/core/accelerator.hpp"
#include "minsky/core/errors.hpp"
#include "minsky/core/network_accelerator.hpp"

using namespace minsky;
using namespace minsky::netacc;

namespace {

// alpha beta = 0.6, gamma = 1/0.6: the quadratic case with all three fixed
// points for i0 between about 0.005 i_C and 0.4 i_C.
CombinedParams base(double i0_over_iC = 0.05) {
  CombinedParams p;
  p.k = 0.001;
  p.alpha = 0.4;
  p.beta = 1.5;
  p.gamma = 1.0 / 0.6;
  p.S = 1.0;
  p.rho_C = 0.5;
  p.n_total = 1'000'000;
  p.i0 = i0_over_iC * p.i_C();
  return p;
}

// Percolation-branch stationarity residual, written out independently.
double F(const CombinedParams& p, double n) {
  const double a = std::pow(p.i0 / p.i_C(), p.beta);
  const double g = 1.0 / p.gamma;
  return a * std::pow(n, p.alpha * p.beta + g) - std::pow(n, g) + std::pow(p.S, g);
}

double map_once(const CombinedParams& p, double n) {
  const double i = p.i0 * std::pow(n, p.alpha);
  const double u = std::pow(i / p.i_C(), p.beta);
  const double perc = u >= 1 ? INFINITY : p.S * std::pow(1 - u, -p.gamma);
  const double ponzi = std::pow(i / p.k, p.beta);
  return std::min({perc, ponzi, double(p.n_total)});
}

double limit(const CombinedParams& p, double n0) {
  auto t = iterate_combined(p, n0, 100000, 1e-14);
  return t.steps.back().n;
}

}  // namespace

TEST_CASE("derived rates") {
  auto p = base();
  CHECK(p.i_C() == doctest::Approx(p.k * std::pow(0.5e6, 1 / 1.5)).epsilon(1e-14));
  CHECK(p.r_max() == doctest::Approx(p.k * std::pow(1e6, 1 / 1.5)).epsilon(1e-14));
  CHECK(p.i_C() == doctest::Approx(std::pow(0.5, 1 / 1.5) * p.r_max()).epsilon(1e-14));
  CHECK(density_from_rate(rate_from_density(0.3, p), p) == doctest::Approx(0.3).epsilon(1e-13));
  p.rho_C = 1.0;
  CHECK_THROWS_AS(p.validate(), ParameterError);
}

TEST_CASE("combined step against a direct evaluation") {
  auto p = base();
  for (double n : {1.0, 3.0, 50.0, 1e3, 1e5, 9e5}) {
    auto s = step_combined(n, p);
    CHECK(s.i_next == doctest::Approx(p.i0 * std::pow(n, p.alpha)).epsilon(1e-14));
    CHECK(s.n_next == doctest::Approx(map_once(p, n)).epsilon(1e-12));
  }
  // above i_C only the ponzi branch and the cap remain
  auto hot = base(2.0);
  auto s = step_combined(1.0, hot);
  CHECK(s.n_next == doctest::Approx(std::min(std::pow(hot.i0 / hot.k, hot.beta), 1e6)).epsilon(1e-12));
  // tiny rates: the network branch tends to S but the ponzi count is smaller still
  auto cold = base(1e-9);
  CHECK(percolation_size(cold.i0, cold) == doctest::Approx(cold.S).epsilon(1e-6));
  CHECK(step_combined(1.0, cold).n_next == doctest::Approx(std::pow(cold.i0 / cold.k, cold.beta)).epsilon(1e-12));
}

TEST_CASE("without the percolation branch the map is the crisis accelerator") {
  auto p = base();
  crisis::AcceleratorParams a{p.i0, p.k, p.alpha, p.beta, p.n_total};
  auto x = iterate_combined(p, 2.0, 60, 0.0, false);
  auto y = crisis::iterate_accelerator(a, 2.0, 60, 0.0);
  REQUIRE(x.steps.size() == y.steps.size());
  for (std::size_t t = 0; t < x.steps.size(); ++t) {
    CHECK(x.steps[t].n == y.steps[t].n);
    CHECK(x.steps[t].i == y.steps[t].i);
  }
}

TEST_CASE("three fixed points: ordering, stationarity, stability") {
  auto p = base();
  auto f = solve_fixed_points(p);
  CHECK(f.regime == Regime::all_three);
  CHECK(f.quadratic);
  REQUIRE(f.n_conv);
  REQUIRE(f.n_div);
  REQUIRE(f.n_core);
  CHECK(*f.n_conv <= *f.n_div);
  CHECK(*f.n_div <= *f.n_core);
  for (const auto& pt : f.points) CHECK(map_once(p, pt.n) == doctest::Approx(pt.n).epsilon(1e-10));
  CHECK(std::fabs(F(p, *f.n_conv)) < 1e-9 * std::pow(*f.n_conv, 1 / p.gamma));
  CHECK(std::fabs(F(p, *f.n_div)) < 1e-9 * std::pow(*f.n_div, 1 / p.gamma));

  // loop gain by central differences in log space
  auto slope = [&](double n) {
    const double h = 1e-6;
    return (std::log(map_once(p, n * (1 + h))) - std::log(map_once(p, n * (1 - h)))) /
           (std::log1p(h) - std::log1p(-h));
  };
  CHECK(std::fabs(slope(*f.n_conv)) < 1);
  CHECK(std::fabs(slope(*f.n_div)) > 1);

  // attraction and repulsion
  for (double e : {-1e-4, 1e-4}) CHECK(limit(p, *f.n_conv * (1 + e)) == doctest::Approx(*f.n_conv).epsilon(1e-6));
  CHECK(limit(p, *f.n_div * (1 - 1e-4)) == doctest::Approx(*f.n_conv).epsilon(1e-6));
  CHECK(limit(p, *f.n_div * (1 + 1e-4)) == doctest::Approx(*f.n_core).epsilon(1e-6));
}

TEST_CASE("quadratic roots agree with bisection") {
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> u(0, 1);
  int compared = 0;
  for (int d = 0; d < 60; ++d) {
    CombinedParams p;
    p.k = 0.0005 + 0.005 * u(g);
    p.beta = 0.8 + 2.0 * u(g);
    p.alpha = (0.2 + 0.6 * u(g)) / p.beta;
    p.gamma = 1.0 / (p.alpha * p.beta);
    p.S = 0.5 + 2.0 * u(g);
    p.rho_C = 0.2 + 0.6 * u(g);
    p.n_total = 1'000'000;
    p.i0 = p.k;
    auto th = thresholds(p);
    p.i0 = th.i_safe + (th.i_0C - th.i_safe) * (0.05 + 0.9 * u(g));
    auto q = percolation_roots_quadratic(p);
    auto b = percolation_roots_bisection(p);
    REQUIRE(q.size() == b.size());
    for (std::size_t j = 0; j < q.size(); ++j) {
      CHECK(b[j] == doctest::Approx(q[j]).epsilon(1e-8));
      ++compared;
    }
  }
  CHECK(compared >= 100);
  auto general = base();
  general.gamma = 2.5;
  CHECK_THROWS_AS(percolation_roots_quadratic(general), ParameterError);
}

TEST_CASE("upper root far above a large population") {
  CombinedParams p;
  p.k = 0.001;
  p.alpha = 0.3;
  p.beta = 1.5;
  p.gamma = 1.0;
  p.S = 1.0;
  p.rho_C = 0.5;
  p.n_total = 1'000'000'000;
  p.i0 = 0.005;
  auto r = percolation_roots_bisection(p);
  REQUIRE(r.size() == 2);
  CHECK(r[0] < r[1]);
  CHECK(r[1] > 1e15);
  // 1 - u is near 1e-17 up there, so check the sign change in long double
  auto Fl = [&](long double n) {
    const long double a = std::pow((long double)p.i0 / (long double)p.i_C(), (long double)p.beta);
    return n * (a * std::pow(n, (long double)(p.alpha * p.beta)) - 1) + 1;
  };
  for (double x : r) {
    CHECK(Fl(x * (1 - 1e-9L)) * Fl(x * (1 + 1e-9L)) < 0);
  }
  CHECK_NOTHROW(solve_fixed_points(p));
  CHECK_NOTHROW(thresholds(p));
}

TEST_CASE("single tangent solution at zero discriminant") {
  auto p = base();
  // 4 (i0/i_C)^beta S^(1/gamma) = 1
  p.i0 = p.i_C() * std::pow(4.0 * std::pow(p.S, 1 / p.gamma), -1 / p.beta);
  auto f = solve_fixed_points(p);
  CHECK(f.regime == Regime::tangent_conv_div);
  REQUIRE(f.n_conv);
  REQUIRE(f.n_div);
  CHECK(*f.n_conv == *f.n_div);
  CHECK(*f.n_conv == doctest::Approx(std::pow(2.0, p.gamma) * p.S).epsilon(1e-12));
}

TEST_CASE("thresholds") {
  auto p = base();
  auto t = thresholds(p);
  CHECK(t.n_safe == doctest::Approx(p.rho_C * double(p.n_total)).epsilon(1e-12));
  CHECK(t.i_safe == doctest::Approx(p.i_C() * std::pow(p.k / p.i_C(), p.alpha * p.beta)).epsilon(1e-12));
  CHECK(t.rho_safe == doctest::Approx(p.rho_C * std::pow(p.rho_C * double(p.n_total), -p.alpha * p.beta)).epsilon(1e-12));
  CHECK(t.rho_safe == doctest::Approx(density_from_rate(t.i_safe, p)).epsilon(1e-10));
  const double abg = p.alpha * p.beta * p.gamma;
  CHECK(t.n_0C == doctest::Approx(p.S * std::pow(1 + 1 / abg, p.gamma)).epsilon(1e-12));
  CHECK(t.n_0C == doctest::Approx(std::pow(2.0, p.gamma) * p.S).epsilon(1e-12));
  CHECK(t.i_safe < t.i_0C);

  // at i0 = i_0C the percolation residual has a double root at N_0C
  auto q = p;
  q.i0 = t.i_0C;
  CHECK(std::fabs(F(q, t.n_0C)) < 1e-10);
  const double h = 1e-5 * t.n_0C;
  CHECK(std::fabs((F(q, t.n_0C + h) - F(q, t.n_0C - h)) / (2 * h)) < 1e-6);

  // general gamma: the same tangency property
  auto r = base();
  r.gamma = 2.7;
  auto tr = thresholds(r);
  r.i0 = tr.i_0C;
  CHECK(std::fabs(F(r, tr.n_0C)) < 1e-9);
  CHECK(tr.n_0C == doctest::Approx(r.S * std::pow(1 + 1 / (r.alpha * r.beta * r.gamma), r.gamma)));

  // the exact junction lies on both branches
  REQUIRE(t.i_safe_exact);
  REQUIRE(t.n_safe_exact);
  CHECK(*t.n_safe_exact == doctest::Approx(std::pow(*t.i_safe_exact * std::pow(*t.n_safe_exact, p.alpha) / p.k, p.beta)).epsilon(1e-8));
}

TEST_CASE("sampled parameter sets keep i_safe below i_0C") {
  std::mt19937_64 g(8);
  std::uniform_real_distribution<double> u(0, 1);
  for (int d = 0; d < 100; ++d) {
    CombinedParams p;
    p.k = 0.001;
    p.beta = 1 + 2 * u(g);
    p.alpha = (0.1 + 0.8 * u(g)) / p.beta;
    p.gamma = 0.5 + 2.5 * u(g);
    p.S = 1 + 2 * u(g);
    p.rho_C = 0.3 + 0.4 * u(g);
    p.n_total = 1'000'000;
    p.i0 = p.k;
    auto t = thresholds(p);
    CHECK(t.i_safe < t.i_0C);
  }
}

TEST_CASE("regimes outside the coexistence band") {
  auto lo = base();
  auto t = thresholds(lo);
  lo.i0 = 0.5 * t.i_safe;
  auto f = solve_fixed_points(lo);
  CHECK(f.regime == Regime::only_conv);
  REQUIRE(f.n_conv);
  for (double n0 : {1.0, 10.0, 1e3, 1e5, 1e6}) {
    CHECK(limit(lo, n0) == doctest::Approx(*f.n_conv).epsilon(1e-6));
    CHECK_FALSE(heads_to_core(classify_phase(lo, n0)));
  }
  auto hi = base();
  hi.i0 = 1.5 * t.i_0C;
  auto h = solve_fixed_points(hi);
  CHECK(h.regime == Regime::only_core);
  REQUIRE(h.n_core);
  for (double n0 : {1.0, 10.0, 1e3, 1e5}) {
    CHECK(limit(hi, n0) == doctest::Approx(*h.n_core).epsilon(1e-6));
    CHECK(heads_to_core(classify_phase(hi, n0)));
  }
}

TEST_CASE("phase labels follow the fixed points and the iteration") {
  auto p = base();
  auto f = solve_fixed_points(p);
  CHECK(classify_phase(f, 1.0) == (1.0 < *f.n_conv ? Phase::micro_crisis : Phase::stable));
  CHECK(classify_phase(f, *f.n_conv * 1.5) == Phase::stable);
  CHECK(classify_phase(f, *f.n_div * 1.5) == Phase::minsky_instability);
  CHECK(classify_phase(f, *f.n_core) == Phase::solid_core);
  CHECK_THROWS(classify_phase(f, 0.5));

  std::mt19937_64 g(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int c = 0; c < 40; ++c) {
    auto q = base(0.006 + 0.6 * u(g));
    auto fq = solve_fixed_points(q);
    const double n0 = std::exp(u(g) * std::log(double(q.n_total)));
    if (fq.n_div && std::fabs(std::log(n0 / *fq.n_div)) < 0.01) continue;
    const auto ph = classify_phase(fq, n0);
    const double lim = limit(q, n0);
    const double target = heads_to_core(ph) ? *fq.n_core : *fq.n_conv;
    CHECK(lim == doctest::Approx(target).epsilon(1e-3));
  }
}

TEST_CASE("solver preconditions") {
  auto p = base();
  p.alpha = 0.8;  // alpha beta = 1.2
  CHECK(solve_fixed_points(p).regime == Regime::unclassified);
  CHECK_THROWS_AS(classify_phase(p, 2.0), ParameterError);
  auto z = base();
  z.alpha = 0.0;
  CHECK_THROWS_AS(percolation_roots_bisection(z), ParameterError);
}

TEST_CASE("phase diagram rows") {
  auto p = base();
  auto th = thresholds(p);
  GridSpec g;
  g.n0_min = 1;
  g.n0_max = 1e6;
  g.n0_count = 60;
  g.y_min = 0.2 * th.i_safe;
  g.y_max = 3 * th.i_0C;
  g.y_count = 40;
  auto grid = phase_diagram(p, g);
  REQUIRE(grid.rows.size() == 40);
  CHECK(grid.n0.size() == 60);
  for (const auto& row : grid.rows) {
    REQUIRE(row.labels.size() == 60);
    CHECK(std::is_sorted(row.labels.begin(), row.labels.end()));
    // the quadratic boundary curves, written out
    auto q = p;
    q.i0 = row.i0;
    const double c = std::pow(q.i0 / q.i_C(), q.beta) * std::pow(q.S, 1 / q.gamma);
    if (1 - 4 * c > 0 && row.percolation_roots.size() == 2) {
      const double sq = std::sqrt(1 - 4 * c);
      CHECK(row.percolation_roots[0] == doctest::Approx(q.S * std::pow(2 / (1 + sq), q.gamma)).epsilon(1e-8));
      CHECK(row.percolation_roots[1] == doctest::Approx(q.S * std::pow((1 + sq) / (2 * c), q.gamma)).epsilon(1e-8));
    }
  }
  // vanishing rates: the network root tends to S, the attractor sits on the ponzi branch
  auto cold = base(1e-8);
  CHECK(percolation_roots(cold).front() == doctest::Approx(cold.S).epsilon(1e-4));
  const double ab = cold.alpha * cold.beta;
  CHECK(*solve_fixed_points(cold).n_conv ==
        doctest::Approx(std::pow(cold.i0 / cold.k, cold.beta / (1 - ab))).epsilon(1e-9));

  GridSpec rho;
  rho.axis = PhaseAxis::rho0;
  rho.y_min = 0.01;
  rho.y_max = 0.4;
  rho.y_count = 5;
  rho.n0_count = 5;
  auto rg = phase_diagram(p, rho);
  for (const auto& row : rg.rows) CHECK(row.i0 == doctest::Approx(rate_from_density(row.y, p)));

  auto bad = p;
  bad.alpha = 0.8;
  CHECK_THROWS(phase_diagram(bad, g));
  GridSpec empty = g;
  empty.y_count = 0;
  CHECK_THROWS_AS(phase_diagram(p, empty), ParameterError);
}
