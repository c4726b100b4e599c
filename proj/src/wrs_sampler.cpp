#include "dose/wrs_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "dose/errors.hpp"
#include "dose/parallel.hpp"
#include "dose/random_keys.hpp"

namespace dose {
namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double gaussian_log_pdf(double x, double mu, double sigma) noexcept {
  const double z = (x - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - kHalfLog2Pi;
}

double log_add_exp(double a, double b) noexcept {
  const double hi = std::max(a, b);
  if (hi == -std::numeric_limits<double>::infinity()) return hi;
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// Total order used everywhere keys are compared.
struct KeyOrder {
  const std::vector<double>& keys;
  std::span<const std::string> ids;
  bool operator()(std::size_t a, std::size_t b) const {
    if (keys[a] != keys[b]) return keys[a] > keys[b];
    return ids[a] < ids[b];
  }
};

}  // namespace

SamplingPlan build_plan(const DistributionStats& stats, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (stats.sigma_data == 0.0) throw DegenerateSigma();
  SamplingPlan plan;
  plan.axis = stats.axis;
  plan.mu_peak_kde = stats.mu_peak_kde;
  plan.mu_peak_wrs = (stats.mu_peak_kde + stats.x_max) / 2.0;
  plan.sigma = stats.sigma_data;
  plan.epsilon = epsilon;
  return plan;
}

double target_log_pdf(const SamplingPlan& plan, double x) noexcept {
  return gaussian_log_pdf(x, plan.mu_peak_wrs, plan.sigma);
}

double reference_log_pdf(const SamplingPlan& plan, double x) noexcept {
  return gaussian_log_pdf(x, plan.mu_peak_kde, plan.sigma);
}

double importance_weight(const SamplingPlan& plan, double x) noexcept {
  const double log_q = target_log_pdf(plan, x);
  const double log_p_eps = log_add_exp(reference_log_pdf(plan, x), std::log(plan.epsilon));
  return std::exp(log_q - log_p_eps);
}

WeightTable compute_weights(const SamplingPlan& plan, std::span<const std::string> ids,
                            std::span<const double> scores) {
  if (ids.size() != scores.size()) throw ConfigError("ids and scores differ in length");
  if (ids.empty()) throw EmptyDataset();
  WeightTable t;
  t.ids.assign(ids.begin(), ids.end());
  t.raw_weights.resize(ids.size());
  parallel_for(ids.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) t.raw_weights[i] = importance_weight(plan, scores[i]);
  });
  const double total = std::accumulate(t.raw_weights.begin(), t.raw_weights.end(), 0.0);
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw DegenerateData("importance weights sum to " + std::to_string(total));
  }
  t.normalized_weights.resize(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) t.normalized_weights[i] = t.raw_weights[i] / total;
  return t;
}

WeightTable uniform_weights(std::span<const std::string> ids) {
  if (ids.empty()) throw EmptyDataset();
  WeightTable t;
  t.ids.assign(ids.begin(), ids.end());
  t.raw_weights.assign(ids.size(), 1.0);
  t.normalized_weights.assign(ids.size(), 1.0 / static_cast<double>(ids.size()));
  return t;
}

std::vector<double> log_random_keys(const WeightTable& table, std::uint64_t seed,
                                    std::string_view stream) {
  std::vector<double> keys(table.size());
  parallel_for(table.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      if (table.raw_weights[i] < kMinKeyedWeight || table.normalized_weights[i] <= 0.0) {
        keys[i] = -std::numeric_limits<double>::infinity();
        continue;
      }
      const double u = uniform_key(seed, stream, table.ids[i]);
      keys[i] = std::log(u) / table.normalized_weights[i];
    }
  });
  return keys;
}

std::vector<std::size_t> rank_by_keys(const WeightTable& table, std::uint64_t seed,
                                      std::string_view stream) {
  const auto keys = log_random_keys(table, seed, stream);
  std::vector<std::size_t> order(table.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), KeyOrder{keys, table.ids});
  return order;
}

std::vector<std::string> sample_without_replacement(const WeightTable& table, std::size_t m,
                                                    std::uint64_t seed, std::string_view stream) {
  const std::size_t n = table.size();
  if (m > n) throw BudgetTooLarge(m, n);
  if (m == 0) return {};
  const auto keys = log_random_keys(table, seed, stream);
  const auto keyed = static_cast<std::size_t>(std::count_if(
      keys.begin(), keys.end(), [](double k) { return k != -std::numeric_limits<double>::infinity(); }));
  if (keyed < m) throw InsufficientSupport(m, keyed);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const KeyOrder cmp{keys, table.ids};
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(), cmp);
  std::vector<std::string> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) out.push_back(table.ids[order[i]]);
  return out;
}

}  // namespace dose
