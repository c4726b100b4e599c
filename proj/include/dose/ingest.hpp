#pragma once
// File formats.
//
//   scores file     JSONL: {"id": str, "text_quality": num, "clip_score": num}
//   samples file    JSONL: {"id": str, "question": str, "answer": str, "image_ref"?: str}
//   selection       <name>.txt with one id per line, plus <name>.manifest.json
//
// Readers stream line by line; blank lines are skipped and line numbers in
// errors are 1-based physical line numbers. Every writer goes through a temp
// file and a rename so an interrupted run never leaves a partial output.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dose/core_model.hpp"
#include "dose/wrs_sampler.hpp"

namespace dose {

struct RawSampleRecord {
  std::string id;
  std::string question;
  std::string answer;
  std::optional<std::string> image_ref;

  // Question and answer both empty: accepted, but worth a warning.
  [[nodiscard]] bool empty_payload() const noexcept { return question.empty() && answer.empty(); }
};

// Throws IoError, ParseError, MissingField, EmptyDataset.
std::vector<ScoredSample> read_scores(const std::filesystem::path& path);
// read_scores + validate_dataset.
Dataset load_dataset(const std::filesystem::path& path);
void write_scores(const Dataset& data, const std::filesystem::path& path);

std::vector<RawSampleRecord> read_samples(const std::filesystem::path& path);
void write_samples(const std::vector<RawSampleRecord>& samples, const std::filesystem::path& path);

// Calls fn(line_no, object) for every non-blank line. Throws ParseError on bad JSON
// or when a line is not an object.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const nlohmann::json&)>& fn);

std::filesystem::path manifest_path_for(const std::filesystem::path& selection_path);

// Writes the id file and its sidecar manifest.
void write_selection(const SelectionResult& result, const std::filesystem::path& path);
std::vector<std::string> read_id_list(const std::filesystem::path& path);

void write_weight_table(const WeightTable& table, const std::filesystem::path& path);

// Temp file in the same directory, then rename over the target. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Stable pretty-printed JSON text (2-space indent, trailing newline).
std::string dump_json(const nlohmann::json& j);

}  // namespace dose
