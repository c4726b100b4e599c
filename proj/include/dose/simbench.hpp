#pragma once
// Synthetic benchmark: corpora with known cluster labels and per-item
// utility, and a set of selection strategies scored against them.
//
// Per-item utility is (x + y) / 2 + noise. Set-level utility depends on the
// model:
//   LinearInScores    mean per-item utility over the selection (quality Q)
//   ClusterCoverage   coverage entropy of the selection over clusters,
//                     normalised by log(#clusters) (coverage C)
//   Mixed(alpha)      alpha * Q + (1 - alpha) * C

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dose/core_model.hpp"

namespace dose {

struct ClusterSpec {
  double weight = 1.0;
  double center_x = 0.5;  // text quality
  double center_y = 0.5;  // clip score
  double spread = 0.05;
};

enum class UtilityModel { LinearInScores, ClusterCoverage, Mixed };

std::string_view utility_model_name(UtilityModel m) noexcept;
UtilityModel parse_utility_model(std::string_view name);

struct SyntheticCorpusSpec {
  std::size_t n = 1000;
  std::vector<ClusterSpec> clusters;
  UtilityModel utility_model = UtilityModel::LinearInScores;
  double alpha = 0.5;  // Mixed only
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const;  // throws InvalidSpec
};

SyntheticCorpusSpec corpus_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SyntheticCorpusSpec& spec);

struct SyntheticCorpus {
  SyntheticCorpusSpec spec;
  Dataset data;
  std::vector<std::size_t> cluster;  // hidden label per record
  std::vector<double> utility;       // hidden per-item utility
};

SyntheticCorpus generate_corpus(const SyntheticCorpusSpec& spec);

enum class Strategy { Random, TopkX, TopkY, TopkSum, WrsX, WrsY, Dose, RegionGrid5pct };

std::string_view strategy_name(Strategy s) noexcept;
Strategy parse_strategy(std::string_view name);
const std::vector<Strategy>& all_strategies();

// Ids chosen by one strategy; exactly `budget` distinct ids.
std::vector<std::string> select_with_strategy(const Dataset& data, Strategy strategy,
                                              std::size_t budget, std::uint64_t seed);

struct StrategyReport {
  std::string strategy;
  std::size_t selected = 0;
  double mean_utility = 0.0;      // under the corpus utility model
  double quality = 0.0;           // Q
  double coverage_entropy = 0.0;  // nats
  double coverage = 0.0;          // C = entropy / log(#clusters)
  double selected_text_mean = 0.0;
  double selected_clip_mean = 0.0;
  double runtime_ms = 0.0;
};

StrategyReport evaluate_selection(const SyntheticCorpus& corpus, const std::vector<std::string>& ids);
double mixed_utility(const StrategyReport& report, double alpha) noexcept;

std::vector<StrategyReport> run_strategies(const SyntheticCorpus& corpus, double fraction,
                                           const std::vector<Strategy>& strategies,
                                           std::uint64_t seed);

nlohmann::json to_json(const StrategyReport& report, bool include_runtime = true);
std::string reports_to_csv(const std::vector<StrategyReport>& reports);

struct AlphaPoint {
  double alpha = 0.0;
  double dose = 0.0;
  double random = 0.0;
  double topk = 0.0;
  [[nodiscard]] bool dose_wins() const noexcept { return dose > random && dose > topk; }
};

// Mixed utility of DOSE, RANDOM and TOPK_SUM across alpha values.
std::vector<AlphaPoint> alpha_sweep(const std::vector<StrategyReport>& reports,
                                    const std::vector<double>& alphas);

}  // namespace dose
