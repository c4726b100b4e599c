#pragma once
// Domain types shared by every pipeline stage.
//
// A Dataset can only be obtained through validate_dataset(), so holding one
// means ids are unique and non-empty and both scores are finite. Scores are
// kept in native scorer units: text quality as a yes-probability, clip score
// as a cosine similarity. Nothing is rescaled.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace dose {

enum class Axis { Text, Clip };

// "text" / "clip"
std::string_view axis_name(Axis axis) noexcept;
// Accepts "text"/"clip" in any case.
Axis parse_axis(std::string_view name);

struct ScoredSample {
  std::string id;
  double text_quality = 0.0;
  double clip_score = 0.0;

  [[nodiscard]] double score(Axis axis) const noexcept {
    return axis == Axis::Text ? text_quality : clip_score;
  }
  bool operator==(const ScoredSample&) const = default;
};

class Dataset {
 public:
  Dataset() = default;

  [[nodiscard]] std::size_t size() const noexcept { return records_.size(); }
  [[nodiscard]] bool empty() const noexcept { return records_.empty(); }
  [[nodiscard]] const std::vector<ScoredSample>& records() const noexcept { return records_; }
  [[nodiscard]] const ScoredSample& operator[](std::size_t i) const { return records_[i]; }

  [[nodiscard]] std::vector<double> scores(Axis axis) const;
  [[nodiscard]] std::vector<std::string> ids() const;

  // Keeps records whose index has keep[i] == true, preserving order.
  [[nodiscard]] Dataset subset(const std::vector<bool>& keep) const;

  bool operator==(const Dataset&) const = default;

 private:
  friend Dataset validate_dataset(std::vector<ScoredSample> records);
  explicit Dataset(std::vector<ScoredSample> records) : records_(std::move(records)) {}

  std::vector<ScoredSample> records_;
};

// Throws EmptyDataset, DuplicateId, NonFiniteScore.
Dataset validate_dataset(std::vector<ScoredSample> records);

struct GridPoint {
  double position = 0.0;
  double density = 0.0;
};

struct DistributionStats {
  Axis axis = Axis::Text;
  double mu_data = 0.0;
  double sigma_data = 0.0;
  double x_min = 0.0;
  double x_max = 0.0;
  double kde_bandwidth = 0.0;  // 0 when the KDE was bypassed (constant data)
  std::vector<GridPoint> kde_grid;
  double mu_peak_kde = 0.0;
};

struct SamplingPlan {
  Axis axis = Axis::Text;
  double mu_peak_wrs = 0.0;
  double mu_peak_kde = 0.0;
  double sigma = 0.0;
  double epsilon = 1e-10;
};

struct OutlierReport {
  std::vector<std::string> removed_ids;
  std::size_t removed_count = 0;
  std::size_t input_count = 0;
  double removed_fraction = 0.0;
  double eps = 0.0;
  std::size_t min_pts = 0;
  bool eps_auto = false;
  // Set when DBSCAN flagged more than half the points and the data was passed through.
  bool guard_triggered = false;
  // Set when auto eps could not be derived (all points identical).
  bool degenerate = false;
};

struct SelectionResult {
  std::vector<std::string> selected_ids;
  std::vector<std::string> s_x_ids;
  std::vector<std::string> s_y_ids;
  std::size_t per_axis_candidate_size = 0;
  std::size_t target_size = 0;
  std::uint64_t seed = 0;
  nlohmann::json manifest;
};

nlohmann::json to_json(const DistributionStats& stats, bool include_grid = false);
nlohmann::json to_json(const SamplingPlan& plan);
nlohmann::json to_json(const OutlierReport& report);

}  // namespace dose
