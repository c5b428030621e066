#include <doctest.h>

#include <cmath>
#include <random>

#include "minsky/core/accelerator.hpp"
#include "minsky/core/errors.hpp"

using namespace minsky;
using namespace minsky::crisis;

namespace {
AcceleratorParams ap(double i0, double k, double alpha, double beta, std::int64_t n_total = 1'000'000'000) {
  return {i0, k, alpha, beta, n_total};
}
}  // namespace

TEST_CASE("paper fixed points") {
  auto s = accelerator_fixed_point(ap(0.004, 0.0015, 0.5, 1.3));
  CHECK(s.n == doctest::Approx(38).epsilon(0.02));
  auto u = accelerator_fixed_point(ap(0.003, 0.005, 0.75, 1.8));
  // quoted as (14, 2.1%): N to nearest, the rate 2.15% cut to one decimal
  CHECK(std::round(u.n) == 14);
  CHECK(std::trunc(u.i * 1000) == 21);
  auto off = accelerator_fixed_point(ap(0.004, 0.0015, 0.0, 1.3));
  CHECK(off.n == doctest::Approx(std::pow(0.004 / 0.0015, 1.3)).epsilon(1e-13));
  CHECK_THROWS_AS(accelerator_fixed_point(ap(0.004, 0.0015, 0.5, 2.0)), NumericalError);
}

TEST_CASE("single step by hand and stationarity") {
  auto p = ap(0.004, 0.0015, 0.5, 1.3);
  auto st = step_accelerator(2.0, p);
  CHECK(st.i_next == doctest::Approx(0.004 * std::sqrt(2.0)).epsilon(1e-14));
  CHECK(st.n_next == doctest::Approx(std::pow(0.004 * std::sqrt(2.0) / 0.0015, 1.3)).epsilon(1e-13));
  CHECK(closed_form_accelerator(p, 2.0, 1).n == doctest::Approx(st.n_next).epsilon(1e-12));
  auto fp = accelerator_fixed_point(p);
  auto same = step_accelerator(fp.n, p);
  CHECK(same.n_next == doctest::Approx(fp.n).epsilon(1e-12));
  CHECK(same.i_next == doctest::Approx(fp.i).epsilon(1e-12));
}

TEST_CASE("negative alpha pulls N down above the fixed point") {
  auto p = ap(0.004, 0.0015, -0.4, 1.3);
  auto fp = accelerator_fixed_point(p);
  for (double f : {1.1, 2.0, 10.0}) CHECK(step_accelerator(fp.n * f, p).n_next < fp.n * f);
}

TEST_CASE("clipping at n_total") {
  auto p = ap(0.003, 0.005, 0.75, 1.8, 500);
  auto traj = iterate_accelerator(p, 16.0, 400, 1e-12);
  for (const auto& s : traj.steps) CHECK(s.n <= 500.0);
  CHECK(traj.steps.back().n == 500.0);
  auto cf = closed_form_accelerator(p, 16.0, 30);
  CHECK(cf.exceeds_clip);
}

TEST_CASE("closed form matches the iteration on random draws") {
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> u(0, 1);
  int compared = 0;
  for (int d = 0; d < 100; ++d) {
    double ab = 0;
    do ab = 0.1 + 1.9 * u(gen);
    while (std::fabs(ab - 1) < 0.05);
    const double beta = 0.5 + 2.5 * u(gen);
    auto p = ap(0.001 + 0.01 * u(gen), 0.001 + 0.01 * u(gen), ab / beta, beta, INT64_C(1) << 62);
    const double n0 = 1 + 100 * u(gen);
    auto c0 = closed_form_accelerator(p, n0, 0);
    CHECK(c0.n == n0);
    CHECK(c0.i == p.i0);
    auto traj = iterate_accelerator(p, n0, 30, 0.0);
    for (const auto& s : traj.steps) {
      auto cf = closed_form_accelerator(p, n0, int(s.t));
      if (cf.overflow || cf.exceeds_clip) break;
      CHECK(cf.n == doctest::Approx(s.n).epsilon(1e-9));
      CHECK(cf.i == doctest::Approx(s.i).epsilon(1e-9));
      ++compared;
    }
  }
  CHECK(compared > 1000);
}

TEST_CASE("unstable case below the fixed point shrinks toward zero") {
  auto p = ap(0.003, 0.005, 0.75, 1.8);
  auto fp = accelerator_fixed_point(p);
  CHECK(closed_form_accelerator(p, fp.n * 0.5, 20).n < 1e-3);
  auto traj = iterate_accelerator(p, fp.n * 0.8, 200, 1e-12);
  CHECK(traj.steps.back().n < traj.steps.front().n);
}

TEST_CASE("eigenvalues and stability") {
  auto s = accelerator_stability(ap(0.004, 0.0015, 0.5, 1.3));
  CHECK(s.stability == walras::Stability::stable);
  CHECK(s.eigenvalues[0] == 0.0);
  CHECK(s.eigenvalues[1] == doctest::Approx(0.65));
  auto u = accelerator_stability(ap(0.003, 0.005, 0.75, 1.8));
  CHECK(u.stability == walras::Stability::unstable);
  CHECK(u.eigenvalues[1] == doctest::Approx(1.35));
  auto z = accelerator_stability(ap(0.003, 0.005, 0.0, 1.8));
  CHECK(z.eigenvalues[0] == 0.0);
  CHECK(z.eigenvalues[1] == 0.0);
  CHECK(z.stability == walras::Stability::stable);
}

TEST_CASE("stable map forgets its start and heals from above") {
  auto p = ap(0.004, 0.0015, 0.5, 1.3);
  auto fp = accelerator_fixed_point(p);
  for (double n0 : {1.0, 2.0, 900.0, 1e5}) {
    auto traj = iterate_accelerator(p, n0, 500, 1e-13);
    CHECK(traj.reason == walras::Termination::converged);
    CHECK(traj.steps.back().n == doctest::Approx(fp.n).epsilon(1e-10));
  }
  auto heal = iterate_accelerator(p, 900.0, 500, 1e-13);
  for (std::size_t t = 1; t < heal.steps.size(); ++t) CHECK(heal.steps[t].n <= heal.steps[t - 1].n);
}

TEST_CASE("unstable fixed point repels in log distance") {
  auto p = ap(0.003, 0.005, 0.75, 1.8);
  auto fp = accelerator_fixed_point(p);
  for (double sign : {-1.0, 1.0}) {
    auto traj = iterate_accelerator(p, fp.n * (1 + sign * 1e-6), 40, 0.0);
    double prev = 0;
    for (const auto& s : traj.steps) {
      const double d = std::fabs(std::log(s.n / fp.n));
      if (s.n >= double(p.n_total) || s.n <= walras::kLowerGuard) break;
      CHECK(d > prev);
      prev = d;
    }
  }
}

TEST_CASE("accelerator parameter validation") {
  CHECK_THROWS_AS(step_accelerator(0.0, ap(0.1, 0.1, 1, 1)), ParameterError);
  CHECK_THROWS_AS(iterate_accelerator(ap(-0.1, 0.1, 1, 1), 2, 5, 0), ParameterError);
  CHECK_THROWS_AS(iterate_accelerator(ap(0.1, 0.1, 1, 1, 0), 2, 5, 0), ParameterError);
}
