#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace minsky::econ {

enum class FirmStatus : std::uint8_t { viable, ponzi, failed };

/// Three-way Minsky label. Only ponzi vs non-ponzi enters the dynamics; the
/// hedge/speculative split is display metadata.
enum class FinanceLabel : std::uint8_t { hedge, speculative, ponzi };

std::string_view to_string(FirmStatus s);
std::string_view to_string(FinanceLabel l);

struct Firm {
  std::int64_t id = 0;
  double resilience = 0.0;  // earnings / debt
  FirmStatus status = FirmStatus::viable;
  bool immunized = false;
  double distance_to_ponzi = 0.0;  // resilience - current rate
};

enum class ResilienceMode : std::uint8_t { rank_deterministic, iid_pareto };

struct ResilienceSpec {
  double k = 0.0;
  double beta = 0.0;
  std::int64_t n_total = 0;
  ResilienceMode mode = ResilienceMode::rank_deterministic;
  std::uint64_t seed = 0;

  double r_max() const;
  void validate() const;
};

struct FeedbackParams {
  double i0 = 0.0;
  double alpha = 0.0;
  void validate() const;
};

/// Immutable snapshot of the firm population. Reclassification produces a new
/// table; copies share the underlying storage.
class FirmTable {
public:
  FirmTable() = default;
  explicit FirmTable(std::vector<Firm> firms, double rate = 0.0);

  std::span<const Firm> firms() const;
  const Firm& operator[](std::size_t idx) const { return (*firms_)[idx]; }
  std::size_t size() const { return firms_ ? firms_->size() : 0; }
  bool empty() const { return size() == 0; }

  /// Interest rate of the last classification (0 if never classified).
  double rate() const { return rate_; }

  std::size_t count(FirmStatus s) const;
  std::vector<double> resiliences() const;

  /// New snapshot with the listed firms marked failed (absorbing). Immunized
  /// firms are left untouched.
  FirmTable with_failed(std::span<const std::int64_t> ids) const;
  FirmTable with_immunized(std::span<const std::int64_t> ids) const;

private:
  std::shared_ptr<const std::vector<Firm>> firms_;
  double rate_ = 0.0;
};

FirmTable sample_resiliences(const ResilienceSpec& spec);

/// Marks r < i as ponzi, r >= i as viable, leaves failed firms failed and
/// records the distance to ponzi status r - i for every firm.
FirmTable classify_firms(const FirmTable& firms, double rate);

/// Continuous aggregate (i/k)^beta; callers clip to the population size.
double ponzi_count(double rate, double k, double beta);

/// i0 * n^alpha for n >= 1. Zero failures map to the pre-shock rate i0.
double interest_from_failures(double n_failed, const FeedbackParams& params);

/// hedge iff DP > margin, speculative iff 0 <= DP <= margin, ponzi iff DP < 0.
/// The default margin is half the current rate.
FinanceLabel finance_label(double resilience, double rate,
                           std::optional<double> hedge_margin = std::nullopt);

}  // namespace minsky::econ
