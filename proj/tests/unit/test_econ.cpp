#include <doctest.h>

#include <cmath>
#include <vector>

#include "minsky/core/econ.hpp"
#include "minsky/core/errors.hpp"

using namespace minsky;
using namespace minsky::econ;

namespace {

FirmTable rank_table(std::int64_t n, double k, double beta) {
  ResilienceSpec s;
  s.k = k;
  s.beta = beta;
  s.n_total = n;
  return sample_resiliences(s);
}

}  // namespace

TEST_CASE("rank resiliences: first firm sits at k, last at r_max") {
  auto one = rank_table(1, 0.0015, 1.3);
  REQUIRE(one.size() == 1);
  CHECK(one[0].resilience == doctest::Approx(0.0015).epsilon(1e-15));

  const std::int64_t n = 5000;
  auto t = rank_table(n, 0.0015, 1.3);
  double mx = 0;
  for (const auto& f : t.firms()) mx = std::max(mx, f.resilience);
  CHECK(mx == doctest::Approx(0.0015 * std::pow(5000.0, 1 / 1.3)).epsilon(1e-13));
}

TEST_CASE("rank count below a rate matches floor((i/k)^beta) within one") {
  const double k = 0.002, beta = 1.7;
  const std::int64_t n = 3000;
  auto t = rank_table(n, k, beta);
  const double r_max = k * std::pow(double(n), 1 / beta);
  for (double frac : {0.001, 0.01, 0.1, 0.37, 0.5, 0.9, 1.0}) {
    const double i = frac * r_max;
    std::int64_t below = 0;
    for (const auto& f : t.firms()) below += f.resilience < i;
    const double x = std::pow(i / k, beta);
    const auto expect = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(x)), 0, n);
    CHECK(std::llabs(below - expect) <= 1);
    CHECK(std::fabs(double(below) - ponzi_count(i, k, beta)) <= 1.0);
    auto c = classify_firms(t, i);
    CHECK(std::int64_t(c.count(FirmStatus::ponzi)) == below);
  }
  CHECK(ponzi_count(r_max, k, beta) == doctest::Approx(double(n)).epsilon(1e-12));
}

TEST_CASE("iid resiliences follow the power-law CDF and are reproducible") {
  ResilienceSpec s;
  s.k = 0.001;
  s.beta = 1.5;
  s.n_total = 200000;
  s.mode = ResilienceMode::iid_pareto;
  s.seed = 77;
  auto a = sample_resiliences(s);
  auto b = sample_resiliences(s);
  REQUIRE(a.size() == b.size());
  bool same = true;
  for (std::size_t j = 0; j < a.size(); ++j) same = same && a[j].resilience == b[j].resilience;
  CHECK(same);

  const double r_max = s.k * std::pow(double(s.n_total), 1 / s.beta);
  for (double q : {0.1, 0.3, 0.5, 0.8}) {
    const double x = q * r_max;
    double below = 0;
    for (const auto& f : a.firms()) below += f.resilience < x;
    const double p = std::pow(q, s.beta);
    const double sd = std::sqrt(p * (1 - p) / double(s.n_total));
    CHECK(std::fabs(below / double(s.n_total) - p) < 5 * sd);
  }
  for (const auto& f : a.firms()) {
    CHECK(f.resilience > 0);
    if (!(f.resilience > 0)) break;
  }
}

TEST_CASE("resilience spec rejects bad parameters") {
  ResilienceSpec s;
  s.k = 0;
  s.beta = 1;
  s.n_total = 10;
  CHECK_THROWS_AS(sample_resiliences(s), ParameterError);
  s.k = 1;
  s.beta = -1;
  CHECK_THROWS_AS(sample_resiliences(s), ParameterError);
  s.beta = 1;
  s.n_total = 0;
  CHECK_THROWS_AS(sample_resiliences(s), ParameterError);
}

TEST_CASE("classification and distance to ponzi") {
  FirmTable t({Firm{0, 0.05}, Firm{1, 0.01}});
  auto c = classify_firms(t, 0.02);
  CHECK(c[0].status == FirmStatus::viable);
  CHECK(c[0].distance_to_ponzi == doctest::Approx(0.03));
  CHECK(c[1].status == FirmStatus::ponzi);
  CHECK(c[1].distance_to_ponzi == doctest::Approx(-0.01));
  CHECK(c.rate() == 0.02);

  // lowering the rate restores a ponzi firm that has not failed
  auto lower = classify_firms(c, 0.005);
  CHECK(lower[1].status == FirmStatus::viable);

  // failed is absorbing under reclassification
  const std::vector<std::int64_t> ids{1};
  auto failed = classify_firms(c.with_failed(ids), 0.001);
  CHECK(failed[1].status == FirmStatus::failed);

  // idempotent at a fixed rate
  auto again = classify_firms(c, 0.02);
  for (std::size_t j = 0; j < c.size(); ++j) {
    CHECK(again[j].status == c[j].status);
    CHECK(again[j].distance_to_ponzi == c[j].distance_to_ponzi);
  }
  CHECK_THROWS_AS(classify_firms(t, 0.0), ParameterError);
}

TEST_CASE("immunized firms are never marked failed") {
  FirmTable t({Firm{0, 0.01}, Firm{1, 0.01}});
  const std::vector<std::int64_t> both{0, 1}, first{0};
  auto out = t.with_immunized(first).with_failed(both);
  CHECK(out[0].status != FirmStatus::failed);
  CHECK(out[1].status == FirmStatus::failed);
  // snapshots are independent
  CHECK(t[1].status == FirmStatus::viable);
}

TEST_CASE("ponzi count values") {
  CHECK(ponzi_count(0.003, 0.003, 2.7) == doctest::Approx(1.0));
  CHECK(ponzi_count(0.004, 0.0015, 1.3) == doctest::Approx(3.58).epsilon(0.003));
  double prev = 0;
  for (double i = 0.001; i < 0.1; i *= 1.3) {
    const double v = ponzi_count(i, 0.0015, 1.3);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("interest from failures") {
  FeedbackParams p{0.003, 0.75};
  CHECK(interest_from_failures(1, p) == doctest::Approx(0.003));
  CHECK(interest_from_failures(0, p) == doctest::Approx(0.003));
  CHECK(interest_from_failures(14, p) == doctest::Approx(0.021).epsilon(0.02));
  FeedbackParams off{0.004, 0.0};
  for (double n : {1.0, 5.0, 1e6}) CHECK(interest_from_failures(n, off) == 0.004);
  FeedbackParams neg{0.004, -0.5};
  CHECK(interest_from_failures(4, neg) == doctest::Approx(0.002));
  double prev = 0;
  for (double n = 1; n < 1e5; n *= 2) {
    const double v = interest_from_failures(n, p);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("three-way finance label") {
  // default margin is half the rate: 0.01 at i = 0.02
  CHECK(finance_label(0.05, 0.02) == FinanceLabel::hedge);
  CHECK(finance_label(0.025, 0.02) == FinanceLabel::speculative);
  CHECK(finance_label(0.015, 0.02) == FinanceLabel::ponzi);
  CHECK(finance_label(0.025, 0.02, 0.001) == FinanceLabel::hedge);
}
