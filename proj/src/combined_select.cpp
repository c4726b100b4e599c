#include "dose/combined_select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "dose/errors.hpp"
#include "dose/random_keys.hpp"

namespace dose {
namespace {

constexpr const char* kComponentVersion = "dose-select/1.0";

std::vector<std::size_t> positions_of(const std::vector<std::size_t>& order) {
  std::vector<std::size_t> pos(order.size());
  for (std::size_t r = 0; r < order.size(); ++r) pos[order[r]] = r;
  return pos;
}

std::vector<std::string> prefix_ids(const WeightTable& table, const std::vector<std::size_t>& order,
                                    std::size_t m) {
  std::vector<std::string> out;
  out.reserve(m);
  for (std::size_t r = 0; r < m && r < order.size(); ++r) out.push_back(table.ids[order[r]]);
  return out;
}

nlohmann::json axis_manifest(const AxisPlanOutcome& outcome) {
  nlohmann::json j = {{"stats", to_json(outcome.stats)},
                      {"uniform_fallback", !outcome.plan.has_value()}};
  j["plan"] = outcome.plan ? to_json(*outcome.plan) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json options_manifest(const SelectOptions& options) {
  return {{"kde",
           {{"bandwidth", options.kde.bandwidth ? nlohmann::json(*options.kde.bandwidth)
                                                : nlohmann::json("auto")},
            {"grid_points", options.kde.grid_points},
            {"refine_iters", options.kde.refine_iters}}},
          {"epsilon", options.epsilon}};
}

}  // namespace

std::string_view trim_rule_name(TrimRule rule) noexcept {
  return rule == TrimRule::RandomUniform ? "random" : "key";
}

TrimRule parse_trim_rule(std::string_view name) {
  if (name == "random") return TrimRule::RandomUniform;
  if (name == "key") return TrimRule::ByCombinedKey;
  throw ConfigError("unknown trim rule '" + std::string(name) + "' (expected random|key)");
}

std::size_t BudgetConfig::resolve(std::size_t n) const {
  std::size_t b = 0;
  if (target_size) {
    b = *target_size;
  } else if (fraction) {
    if (!(*fraction >= 0.0 && *fraction <= 1.0)) throw ConfigError("fraction must be in [0, 1]");
    b = static_cast<std::size_t>(std::floor(*fraction * static_cast<double>(n) + 1e-9));
    b = std::min(b, n);
  } else {
    throw ConfigError("budget needs either a target size or a fraction");
  }
  if (b > n) throw BudgetTooLarge(b, n);
  return b;
}

AxisPlanOutcome plan_axis(const Dataset& data, Axis axis, const SelectOptions& options) {
  const auto scores = data.scores(axis);
  const auto ids = data.ids();
  AxisPlanOutcome out;
  out.stats = compute_stats(axis, scores, options.kde);
  try {
    out.plan = build_plan(out.stats, options.epsilon);
    out.weights = compute_weights(*out.plan, ids, scores);
  } catch (const DegenerateSigma&) {
    out.plan.reset();
    out.weights = uniform_weights(ids);
  }
  return out;
}

std::size_t intersection_size(const std::vector<std::size_t>& pos_x,
                              const std::vector<std::size_t>& pos_y, std::size_t m) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < pos_x.size(); ++i) {
    if (pos_x[i] < m && pos_y[i] < m) ++count;
  }
  return count;
}

CandidateSearch search_candidate_size(const std::vector<std::size_t>& pos_x,
                                      const std::vector<std::size_t>& pos_y, std::size_t target,
                                      std::size_t cap) {
  CandidateSearch s;
  if (target == 0) {
    s.reached = true;
    return s;
  }
  auto probe = [&](std::size_t m) {
    s.probes.push_back(m);
    return intersection_size(pos_x, pos_y, m) >= target;
  };
  // The intersection can never exceed m, so m = target is the first candidate.
  std::size_t lo = target - 1;  // known insufficient (or below target)
  std::size_t hi = std::min(target, cap);
  while (!probe(hi)) {
    if (hi >= cap) return s;
    lo = hi;
    hi = std::min(cap, hi * 2);
  }
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (probe(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  s.candidate_size = hi;
  s.reached = true;
  return s;
}

std::vector<std::string> intersect_candidates(const std::vector<std::string>& s_x,
                                              const std::vector<std::string>& s_y) {
  const std::unordered_set<std::string> in_y(s_y.begin(), s_y.end());
  std::vector<std::string> out;
  for (const auto& id : s_x) {
    if (in_y.count(id)) out.push_back(id);
  }
  return out;
}

std::vector<std::string> trim_to_budget(const std::vector<std::string>& candidates,
                                        std::size_t budget, TrimRule rule, std::uint64_t seed,
                                        const std::unordered_map<std::string, double>& combined_log_keys) {
  std::vector<double> keys(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (rule == TrimRule::RandomUniform) {
      keys[i] = uniform_key(seed, "trim", candidates[i]);
    } else {
      const auto it = combined_log_keys.find(candidates[i]);
      keys[i] = it == combined_log_keys.end() ? -std::numeric_limits<double>::infinity() : it->second;
    }
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (keys[a] != keys[b]) return keys[a] > keys[b];
    return candidates[a] < candidates[b];
  });
  std::vector<std::string> out;
  const std::size_t keep = std::min(budget, candidates.size());
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) out.push_back(candidates[order[i]]);
  return out;
}

SelectionResult dose_select(const Dataset& data, const BudgetConfig& budget, std::uint64_t seed,
                            const SelectOptions& options) {
  if (data.empty()) throw EmptyDataset();
  options.kde.validate();
  const std::size_t n = data.size();
  const std::size_t target = budget.resolve(n);
  const std::size_t cap = std::min(n, budget.max_candidate_size.value_or(n));

  const auto text = plan_axis(data, Axis::Text, options);
  const auto clip = plan_axis(data, Axis::Clip, options);
  const auto order_x = rank_by_keys(text.weights, seed, axis_name(Axis::Text));
  const auto order_y = rank_by_keys(clip.weights, seed, axis_name(Axis::Clip));
  const auto pos_x = positions_of(order_x);
  const auto pos_y = positions_of(order_y);

  CandidateSearch search;
  if (budget.budget_search) {
    search = search_candidate_size(pos_x, pos_y, target, cap);
    if (!search.reached) {
      throw ConfigError("budget " + std::to_string(target) +
                        " unreachable with max candidate size " + std::to_string(cap));
    }
  } else {
    search.candidate_size = std::min(target, cap);
    search.reached = true;
  }
  const std::size_t m = search.candidate_size;

  SelectionResult result;
  result.seed = seed;
  result.target_size = target;
  result.per_axis_candidate_size = m;
  result.s_x_ids = prefix_ids(text.weights, order_x, m);
  result.s_y_ids = prefix_ids(clip.weights, order_y, m);
  const auto both = intersect_candidates(result.s_x_ids, result.s_y_ids);

  std::unordered_map<std::string, double> combined;
  if (budget.trim_rule == TrimRule::ByCombinedKey) {
    const auto kx = log_random_keys(text.weights, seed, axis_name(Axis::Text));
    const auto ky = log_random_keys(clip.weights, seed, axis_name(Axis::Clip));
    std::unordered_set<std::string> wanted(both.begin(), both.end());
    for (std::size_t i = 0; i < n; ++i) {
      if (wanted.count(text.weights.ids[i])) combined[text.weights.ids[i]] = kx[i] + ky[i];
    }
  }
  const std::uint64_t trim_seed = derive_seed(seed, "trim");
  result.selected_ids = trim_to_budget(both, target, budget.trim_rule, trim_seed, combined);

  result.manifest = {
      {"component", kComponentVersion},
      {"mode", "dose"},
      {"seed", seed},
      {"input_count", n},
      {"target_size", target},
      {"budget",
       {{"fraction", budget.fraction ? nlohmann::json(*budget.fraction) : nlohmann::json(nullptr)},
        {"target_size", budget.target_size ? nlohmann::json(*budget.target_size) : nlohmann::json(nullptr)},
        {"max_candidate_size", cap},
        {"trim_rule", trim_rule_name(budget.trim_rule)},
        {"budget_search", budget.budget_search}}},
      {"per_axis_candidate_size", m},
      {"search_probes", search.probes},
      {"s_x_size", result.s_x_ids.size()},
      {"s_y_size", result.s_y_ids.size()},
      {"intersection_size", both.size()},
      {"selected_size", result.selected_ids.size()},
      {"trim_seed", trim_seed},
      {"options", options_manifest(options)},
      {"axes", {{"text", axis_manifest(text)}, {"clip", axis_manifest(clip)}}},
  };
  return result;
}

SelectionResult wrs_select_axis(const Dataset& data, Axis axis, std::size_t m, std::uint64_t seed,
                                const SelectOptions& options) {
  if (data.empty()) throw EmptyDataset();
  options.kde.validate();
  const auto outcome = plan_axis(data, axis, options);
  SelectionResult result;
  result.seed = seed;
  result.target_size = m;
  result.per_axis_candidate_size = m;
  result.selected_ids = sample_without_replacement(outcome.weights, m, seed, axis_name(axis));
  (axis == Axis::Text ? result.s_x_ids : result.s_y_ids) = result.selected_ids;
  result.manifest = {
      {"component", kComponentVersion},
      {"mode", "single-axis"},
      {"axis", axis_name(axis)},
      {"seed", seed},
      {"input_count", data.size()},
      {"target_size", m},
      {"per_axis_candidate_size", m},
      {"selected_size", result.selected_ids.size()},
      {"options", options_manifest(options)},
      {"axes", {{axis_name(axis), axis_manifest(outcome)}}},
  };
  return result;
}

std::size_t bin_index(double v, double lo, double hi, std::size_t bins) noexcept {
  if (bins <= 1 || !(hi > lo)) return 0;
  const double t = (v - lo) / (hi - lo) * static_cast<double>(bins);
  const double c = std::ceil(t) - 1.0;
  if (c < 0.0) return 0;
  return std::min(bins - 1, static_cast<std::size_t>(c));
}

RegionGridReport region_grid_report(const Dataset& data, std::size_t rows, std::size_t cols,
                                    std::uint64_t seed, double sample_fraction) {
  if (rows == 0 || cols == 0) throw ConfigError("region grid needs rows, cols >= 1");
  RegionGridReport rep;
  rep.rows = rows;
  rep.cols = cols;
  if (data.empty()) throw EmptyDataset();
  const auto text = axis_stats(data.scores(Axis::Text));
  const auto clip = axis_stats(data.scores(Axis::Clip));
  rep.text_min = text.min;
  rep.text_max = text.max;
  rep.clip_min = clip.min;
  rep.clip_max = clip.max;

  std::vector<std::vector<std::size_t>> members(rows * cols);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t r = bin_index(data[i].text_quality, text.min, text.max, rows);
    const std::size_t c = bin_index(data[i].clip_score, clip.min, clip.max, cols);
    members[r * cols + c].push_back(i);
  }

  const std::uint64_t sample_seed = derive_seed(seed, "region-grid");
  rep.cells.resize(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      auto& cell = rep.cells[r * cols + c];
      const auto& idx = members[r * cols + c];
      cell.row = r;
      cell.col = c;
      cell.count = idx.size();
      if (idx.empty()) continue;
      double st = 0.0, sc = 0.0;
      std::vector<std::string> ids;
      ids.reserve(idx.size());
      for (std::size_t i : idx) {
        st += data[i].text_quality;
        sc += data[i].clip_score;
        ids.push_back(data[i].id);
      }
      cell.mean_text = st / static_cast<double>(idx.size());
      cell.mean_clip = sc / static_cast<double>(idx.size());
      const auto k = static_cast<std::size_t>(
          std::floor(sample_fraction * static_cast<double>(idx.size()) + 1e-9));
      const std::string tag = "r" + std::to_string(r) + "c" + std::to_string(c);
      cell.sample_ids = trim_to_budget(ids, k, TrimRule::RandomUniform, derive_seed(sample_seed, tag));
    }
  }
  return rep;
}

nlohmann::json to_json(const RegionGridReport& report) {
  auto cells = nlohmann::json::array();
  for (const auto& c : report.cells) {
    cells.push_back({{"row", c.row},
                     {"col", c.col},
                     {"count", c.count},
                     {"mean_text_quality", c.mean_text},
                     {"mean_clip_score", c.mean_clip},
                     {"sample_ids", c.sample_ids}});
  }
  return {{"rows", report.rows},
          {"cols", report.cols},
          {"text_quality_range", {report.text_min, report.text_max}},
          {"clip_score_range", {report.clip_min, report.clip_max}},
          {"cells", std::move(cells)}};
}

}  // namespace dose
