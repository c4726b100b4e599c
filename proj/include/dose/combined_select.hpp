#pragma once
// Two-axis selection: WRS on each score axis, intersection of the candidate
// sets, then exact budget control.
//
// Each axis is ranked once by its random keys (one fixed seed per axis). The
// size-M candidate set is the rank prefix of length M, so the intersection
// size is non-decreasing in M and the smallest sufficient M is found by
// doubling then bisection.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dose/core_model.hpp"
#include "dose/density.hpp"
#include "dose/wrs_sampler.hpp"

namespace dose {

enum class TrimRule { RandomUniform, ByCombinedKey };

std::string_view trim_rule_name(TrimRule rule) noexcept;  // "random" / "key"
TrimRule parse_trim_rule(std::string_view name);

struct BudgetConfig {
  std::optional<std::size_t> target_size;
  std::optional<double> fraction;  // used when target_size is unset
  std::optional<std::size_t> max_candidate_size;  // defaults to N
  TrimRule trim_rule = TrimRule::RandomUniform;
  // false: take M = B per axis and accept the raw intersection (may be < B).
  bool budget_search = true;

  // B for a dataset of n items. Throws ConfigError / BudgetTooLarge.
  [[nodiscard]] std::size_t resolve(std::size_t n) const;
};

struct SelectOptions {
  KdeConfig kde;
  double epsilon = kDefaultEpsilon;
};

// Everything derived for one axis before sampling.
struct AxisPlanOutcome {
  DistributionStats stats;
  std::optional<SamplingPlan> plan;  // nullopt = uniform fallback (sigma_data == 0)
  WeightTable weights;
};

AxisPlanOutcome plan_axis(const Dataset& data, Axis axis, const SelectOptions& options);

// |{i : pos_x[i] < m and pos_y[i] < m}| where pos_* are rank positions.
std::size_t intersection_size(const std::vector<std::size_t>& pos_x,
                              const std::vector<std::size_t>& pos_y, std::size_t m);

struct CandidateSearch {
  std::size_t candidate_size = 0;          // M'
  std::vector<std::size_t> probes;         // every M evaluated, in order
  bool reached = false;
};

// Smallest m in [target, cap] with intersection_size(m) >= target.
CandidateSearch search_candidate_size(const std::vector<std::size_t>& pos_x,
                                      const std::vector<std::size_t>& pos_y, std::size_t target,
                                      std::size_t cap);

// Ids present in both lists, in the order they appear in s_x.
std::vector<std::string> intersect_candidates(const std::vector<std::string>& s_x,
                                              const std::vector<std::string>& s_y);

// Orders the candidates by the trim rule and keeps the first `budget`.
// RandomUniform ranks by a uniform key derived from `seed`; ByCombinedKey
// ranks by combined_log_keys (sum of the two axis log keys), descending.
std::vector<std::string> trim_to_budget(
    const std::vector<std::string>& candidates, std::size_t budget, TrimRule rule,
    std::uint64_t seed, const std::unordered_map<std::string, double>& combined_log_keys = {});

SelectionResult dose_select(const Dataset& data, const BudgetConfig& budget, std::uint64_t seed,
                            const SelectOptions& options = {});

// WRS along one axis only: m draws, no intersection.
SelectionResult wrs_select_axis(const Dataset& data, Axis axis, std::size_t m, std::uint64_t seed,
                                const SelectOptions& options = {});

struct RegionCell {
  std::size_t row = 0;  // text_quality bin
  std::size_t col = 0;  // clip_score bin
  std::size_t count = 0;
  double mean_text = 0.0;
  double mean_clip = 0.0;
  std::vector<std::string> sample_ids;
};

struct RegionGridReport {
  std::size_t rows = 0;
  std::size_t cols = 0;
  double text_min = 0.0, text_max = 0.0;
  double clip_min = 0.0, clip_max = 0.0;
  std::vector<RegionCell> cells;  // row-major
};

// Equal-width bin index; values on an interior edge go to the lower bin.
std::size_t bin_index(double v, double lo, double hi, std::size_t bins) noexcept;

RegionGridReport region_grid_report(const Dataset& data, std::size_t rows = 3, std::size_t cols = 3,
                                    std::uint64_t seed = 0, double sample_fraction = 0.05);

nlohmann::json to_json(const RegionGridReport& report);

}  // namespace dose
