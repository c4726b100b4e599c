#pragma once
// End-to-end run: scores (loaded or computed) -> outlier filter -> two-axis
// selection -> selection file, manifest, and analysis artifacts.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "dose/combined_select.hpp"
#include "dose/errors.hpp"
#include "dose/outlier_filter.hpp"
#include "dose/prompt_scoring.hpp"

namespace dose {

inline constexpr const char* kDoseVersion = "1.0.0";

// An error tagged with the pipeline stage it came from.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.error_class(), stage + ": " + cause.what()), stage_(std::move(stage)) {}
  [[nodiscard]] const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct PipelineConfig {
  std::optional<std::filesystem::path> scores_path;
  std::optional<std::filesystem::path> samples_path;
  ScorerOptions scorer;
  bool drop_failed = false;

  bool filter_enabled = true;
  DbscanParams filter;

  SelectOptions select;
  BudgetConfig budget;
  std::optional<std::uint64_t> seed;

  std::filesystem::path output_dir = "dose-out";
  bool dry_run = false;

  // Inputs exist, exactly one of scores/samples, budget present. Throws ConfigError / IoError.
  void validate() const;
};

// Reads a YAML config file. Unknown keys are rejected.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
// Same, from YAML text.
PipelineConfig parse_pipeline_config(const std::string& yaml_text);

nlohmann::json config_echo(const PipelineConfig& config);

struct PipelineOutcome {
  SelectionResult selection;
  OutlierReport outliers;
  nlohmann::json analysis;
  nlohmann::json plan;  // what --dry-run prints
  std::filesystem::path selection_path;
};

// Before/after KDE summaries for each axis of a selection.
nlohmann::json analyze_selection(const Dataset& population, const std::vector<std::string>& selected,
                                 const KdeConfig& kde);

PipelineOutcome run_pipeline(const PipelineConfig& config);

// Hex BLAKE2b-128 of a file's bytes.
std::string file_content_hash(const std::filesystem::path& path);

}  // namespace dose
