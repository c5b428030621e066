#include "minsky/core/econ.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "minsky/core/errors.hpp"
#include "minsky/core/rng.hpp"

namespace minsky::econ {

std::string_view to_string(FirmStatus s) {
  switch (s) {
    case FirmStatus::viable: return "viable";
    case FirmStatus::ponzi: return "ponzi";
    case FirmStatus::failed: return "failed";
  }
  return "?";
}

std::string_view to_string(FinanceLabel l) {
  switch (l) {
    case FinanceLabel::hedge: return "hedge";
    case FinanceLabel::speculative: return "speculative";
    case FinanceLabel::ponzi: return "ponzi";
  }
  return "?";
}

double ResilienceSpec::r_max() const {
  return k * std::pow(static_cast<double>(n_total), 1.0 / beta);
}

void ResilienceSpec::validate() const {
  if (!(k > 0.0) || !std::isfinite(k)) throw ParameterError("resilience: k must be positive");
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw ParameterError("resilience: beta must be positive");
  if (n_total < 1) throw ParameterError("resilience: n_total must be >= 1");
}

void FeedbackParams::validate() const {
  if (!(i0 > 0.0) || !std::isfinite(i0)) throw ParameterError("feedback: i0 must be positive");
  if (!std::isfinite(alpha)) throw ParameterError("feedback: alpha must be finite");
}

FirmTable::FirmTable(std::vector<Firm> firms, double rate)
    : firms_(std::make_shared<const std::vector<Firm>>(std::move(firms))), rate_(rate) {}

std::span<const Firm> FirmTable::firms() const {
  if (!firms_) return {};
  return {firms_->data(), firms_->size()};
}

std::size_t FirmTable::count(FirmStatus s) const {
  auto f = firms();
  return static_cast<std::size_t>(
      std::count_if(f.begin(), f.end(), [s](const Firm& x) { return x.status == s; }));
}

std::vector<double> FirmTable::resiliences() const {
  std::vector<double> out;
  out.reserve(size());
  for (const auto& f : firms()) out.push_back(f.resilience);
  return out;
}

FirmTable FirmTable::with_failed(std::span<const std::int64_t> ids) const {
  std::vector<Firm> copy(firms().begin(), firms().end());
  for (auto id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= copy.size())
      throw ParameterError("firm id out of range: " + std::to_string(id));
    auto& f = copy[static_cast<std::size_t>(id)];
    if (!f.immunized) f.status = FirmStatus::failed;
  }
  return FirmTable(std::move(copy), rate_);
}

FirmTable FirmTable::with_immunized(std::span<const std::int64_t> ids) const {
  std::vector<Firm> copy(firms().begin(), firms().end());
  for (auto id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= copy.size())
      throw ParameterError("firm id out of range: " + std::to_string(id));
    copy[static_cast<std::size_t>(id)].immunized = true;
  }
  return FirmTable(std::move(copy), rate_);
}

FirmTable sample_resiliences(const ResilienceSpec& spec) {
  spec.validate();
  const auto n = static_cast<std::size_t>(spec.n_total);
  std::vector<Firm> firms(n);
  const double inv_beta = 1.0 / spec.beta;
  if (spec.mode == ResilienceMode::rank_deterministic) {
    for (std::size_t idx = 0; idx < n; ++idx) {
      firms[idx].id = static_cast<std::int64_t>(idx);
      firms[idx].resilience = spec.k * std::pow(static_cast<double>(idx + 1), inv_beta);
    }
  } else {
    // Inverse CDF of Prob[r < x] = (x / r_max)^beta on (0, r_max].
    Rng rng(spec.seed);
    const double r_max = spec.r_max();
    for (std::size_t idx = 0; idx < n; ++idx) {
      firms[idx].id = static_cast<std::int64_t>(idx);
      firms[idx].resilience = r_max * std::pow(rng.uniform_open_zero(), inv_beta);
    }
  }
  for (auto& f : firms) f.distance_to_ponzi = f.resilience;
  return FirmTable(std::move(firms), 0.0);
}

FirmTable classify_firms(const FirmTable& firms, double rate) {
  if (!(rate > 0.0)) throw ParameterError("classify_firms: rate must be positive");
  std::vector<Firm> out(firms.firms().begin(), firms.firms().end());
  for (auto& f : out) {
    f.distance_to_ponzi = f.resilience - rate;
    if (f.status == FirmStatus::failed) continue;
    f.status = f.resilience < rate ? FirmStatus::ponzi : FirmStatus::viable;
  }
  return FirmTable(std::move(out), rate);
}

double ponzi_count(double rate, double k, double beta) {
  return std::exp(beta * (std::log(rate) - std::log(k)));
}

double interest_from_failures(double n_failed, const FeedbackParams& params) {
  if (n_failed < 1.0) return params.i0;
  return params.i0 * std::pow(n_failed, params.alpha);
}

FinanceLabel finance_label(double resilience, double rate, std::optional<double> hedge_margin) {
  const double dp = resilience - rate;
  const double margin = hedge_margin.value_or(0.5 * rate);
  if (dp < 0.0) return FinanceLabel::ponzi;
  return dp > margin ? FinanceLabel::hedge : FinanceLabel::speculative;
}

}  // namespace minsky::econ
