#include "dose/core_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_set>

#include "dose/errors.hpp"

namespace dose {

std::string_view axis_name(Axis axis) noexcept { return axis == Axis::Text ? "text" : "clip"; }

Axis parse_axis(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "text") return Axis::Text;
  if (lower == "clip") return Axis::Clip;
  throw ConfigError("unknown axis '" + std::string(name) + "' (expected text|clip)");
}

std::vector<double> Dataset::scores(Axis axis) const {
  std::vector<double> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(r.score(axis));
  return out;
}

std::vector<std::string> Dataset::ids() const {
  std::vector<std::string> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(r.id);
  return out;
}

Dataset Dataset::subset(const std::vector<bool>& keep) const {
  std::vector<ScoredSample> kept;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (i < keep.size() && keep[i]) kept.push_back(records_[i]);
  }
  return Dataset(std::move(kept));
}

Dataset validate_dataset(std::vector<ScoredSample> records) {
  if (records.empty()) throw EmptyDataset();
  std::unordered_set<std::string_view> seen;
  seen.reserve(records.size());
  for (const auto& r : records) {
    if (r.id.empty()) throw ConfigError("record with empty id");
    if (!std::isfinite(r.text_quality)) throw NonFiniteScore(r.id, "TEXT");
    if (!std::isfinite(r.clip_score)) throw NonFiniteScore(r.id, "CLIP");
    if (!seen.insert(r.id).second) throw DuplicateId(r.id);
  }
  return Dataset(std::move(records));
}

nlohmann::json to_json(const DistributionStats& stats, bool include_grid) {
  nlohmann::json j = {
      {"axis", axis_name(stats.axis)},
      {"mu_data", stats.mu_data},
      {"sigma_data", stats.sigma_data},
      {"x_min", stats.x_min},
      {"x_max", stats.x_max},
      {"kde_bandwidth", stats.kde_bandwidth},
      {"kde_grid_points", stats.kde_grid.size()},
      {"mu_peak_kde", stats.mu_peak_kde},
  };
  if (include_grid) {
    auto grid = nlohmann::json::array();
    for (const auto& g : stats.kde_grid) grid.push_back({g.position, g.density});
    j["kde_grid"] = std::move(grid);
  }
  return j;
}

nlohmann::json to_json(const SamplingPlan& plan) {
  return {
      {"axis", axis_name(plan.axis)},
      {"mu_peak_wrs", plan.mu_peak_wrs},
      {"mu_peak_kde", plan.mu_peak_kde},
      {"sigma", plan.sigma},
      {"epsilon", plan.epsilon},
  };
}

nlohmann::json to_json(const OutlierReport& report) {
  return {
      {"removed_ids", report.removed_ids},
      {"removed_count", report.removed_count},
      {"input_count", report.input_count},
      {"removed_fraction", report.removed_fraction},
      {"parameters", {{"eps", report.eps}, {"eps_auto", report.eps_auto}, {"min_pts", report.min_pts}}},
      {"guard_triggered", report.guard_triggered},
      {"degenerate", report.degenerate},
  };
}

}  // namespace dose
