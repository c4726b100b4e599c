#pragma once
// Importance-ratio weights and weighted sampling without replacement.
//
// The target q is a Gaussian centred halfway between the KDE mode and the
// maximum score; the reference p is a Gaussian at the KDE mode. Both share
// sigma_data. Each item gets w = q(x) / (p(x) + epsilon) and the sample is
// drawn with random keys u^(1/w'), u derived from (seed, stream, id).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dose/core_model.hpp"

namespace dose {

inline constexpr double kDefaultEpsilon = 1e-10;
// Items below this raw weight get key 0.
inline constexpr double kMinKeyedWeight = 1e-300;

struct WeightTable {
  std::vector<std::string> ids;
  std::vector<double> raw_weights;
  std::vector<double> normalized_weights;

  [[nodiscard]] std::size_t size() const noexcept { return ids.size(); }
};

// Throws DegenerateSigma when stats.sigma_data == 0.
SamplingPlan build_plan(const DistributionStats& stats, double epsilon = kDefaultEpsilon);

double target_log_pdf(const SamplingPlan& plan, double x) noexcept;     // log q(x)
double reference_log_pdf(const SamplingPlan& plan, double x) noexcept;  // log p(x)
// q(x) / (p(x) + epsilon), evaluated through logs so q and p may underflow individually.
double importance_weight(const SamplingPlan& plan, double x) noexcept;

WeightTable compute_weights(const SamplingPlan& plan, std::span<const std::string> ids,
                            std::span<const double> scores);
// Equal weights; the fallback when an axis has no spread.
WeightTable uniform_weights(std::span<const std::string> ids);

// log of the random key u^(1/w') per item; -inf for items below kMinKeyedWeight.
std::vector<double> log_random_keys(const WeightTable& table, std::uint64_t seed,
                                    std::string_view stream);

// All item indices ordered by descending key, ties by ascending id. The first
// m entries are the size-m sample for every m, which is the prefix property
// budget search relies on.
std::vector<std::size_t> rank_by_keys(const WeightTable& table, std::uint64_t seed,
                                      std::string_view stream);

// m distinct ids in descending key order.
// Throws BudgetTooLarge (m > N) and InsufficientSupport (< m keyed items).
std::vector<std::string> sample_without_replacement(const WeightTable& table, std::size_t m,
                                                    std::uint64_t seed,
                                                    std::string_view stream = "wrs");

}  // namespace dose
