#include "dose/ingest.hpp"

#include <unistd.h>

#include <atomic>
#include <fstream>
#include <sstream>

#include "dose/errors.hpp"

namespace fs = std::filesystem;

namespace dose {
namespace {

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

const nlohmann::json& require(const nlohmann::json& obj, std::size_t line_no, const char* field) {
  const auto it = obj.find(field);
  if (it == obj.end()) throw MissingField(line_no, field);
  return *it;
}

double require_number(const nlohmann::json& obj, std::size_t line_no, const char* field) {
  const auto& v = require(obj, line_no, field);
  if (!v.is_number()) throw ParseError(line_no, std::string("field '") + field + "' is not a number");
  return v.get<double>();
}

std::string require_string(const nlohmann::json& obj, std::size_t line_no, const char* field) {
  const auto& v = require(obj, line_no, field);
  if (!v.is_string()) throw ParseError(line_no, std::string("field '") + field + "' is not a string");
  return v.get<std::string>();
}

}  // namespace

void for_each_jsonl(const fs::path& path,
                    const std::function<void(std::size_t, const nlohmann::json&)>& fn) {
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, e.what());
    }
    if (!obj.is_object()) throw ParseError(line_no, "expected a JSON object");
    fn(line_no, obj);
  }
  if (in.bad()) throw IoError("read failure on " + path.string());
}

std::vector<ScoredSample> read_scores(const fs::path& path) {
  std::vector<ScoredSample> out;
  for_each_jsonl(path, [&](std::size_t line_no, const nlohmann::json& obj) {
    ScoredSample s;
    s.id = require_string(obj, line_no, "id");
    s.text_quality = require_number(obj, line_no, "text_quality");
    s.clip_score = require_number(obj, line_no, "clip_score");
    out.push_back(std::move(s));
  });
  if (out.empty()) throw EmptyDataset();
  return out;
}

Dataset load_dataset(const fs::path& path) { return validate_dataset(read_scores(path)); }

void write_scores(const Dataset& data, const fs::path& path) {
  std::string body;
  for (const auto& r : data.records()) {
    body += nlohmann::json{{"id", r.id}, {"text_quality", r.text_quality}, {"clip_score", r.clip_score}}.dump();
    body += '\n';
  }
  write_file_atomic(path, body);
}

std::vector<RawSampleRecord> read_samples(const fs::path& path) {
  std::vector<RawSampleRecord> out;
  for_each_jsonl(path, [&](std::size_t line_no, const nlohmann::json& obj) {
    RawSampleRecord r;
    r.id = require_string(obj, line_no, "id");
    if (r.id.empty()) throw ParseError(line_no, "empty id");
    r.question = require_string(obj, line_no, "question");
    r.answer = require_string(obj, line_no, "answer");
    if (const auto it = obj.find("image_ref"); it != obj.end() && !it->is_null()) {
      if (!it->is_string()) throw ParseError(line_no, "field 'image_ref' is not a string");
      r.image_ref = it->get<std::string>();
    }
    out.push_back(std::move(r));
  });
  if (out.empty()) throw EmptyDataset();
  return out;
}

void write_samples(const std::vector<RawSampleRecord>& samples, const fs::path& path) {
  std::string body;
  for (const auto& r : samples) {
    nlohmann::json j = {{"id", r.id}, {"question", r.question}, {"answer", r.answer}};
    if (r.image_ref) j["image_ref"] = *r.image_ref;
    body += j.dump();
    body += '\n';
  }
  write_file_atomic(path, body);
}

fs::path manifest_path_for(const fs::path& selection_path) {
  fs::path p = selection_path;
  return p.replace_extension(".manifest.json");
}

void write_selection(const SelectionResult& result, const fs::path& path) {
  std::string ids;
  for (const auto& id : result.selected_ids) {
    ids += id;
    ids += '\n';
  }
  nlohmann::json manifest = result.manifest;
  manifest["seed"] = result.seed;
  manifest["target_size"] = result.target_size;
  manifest["per_axis_candidate_size"] = result.per_axis_candidate_size;
  manifest["selected_size"] = result.selected_ids.size();
  manifest["selection_file"] = path.filename().string();
  // Manifest first: a present id file always has its manifest beside it.
  write_file_atomic(manifest_path_for(path), dump_json(manifest));
  write_file_atomic(path, ids);
}

std::vector<std::string> read_id_list(const fs::path& path) {
  auto in = open_input(path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

void write_weight_table(const WeightTable& table, const fs::path& path) {
  std::string body;
  for (std::size_t i = 0; i < table.size(); ++i) {
    body += nlohmann::json{{"id", table.ids[i]},
                           {"raw_weight", table.raw_weights[i]},
                           {"normalized_weight", table.normalized_weights[i]}}
                .dump();
    body += '\n';
  }
  write_file_atomic(path, body);
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  static std::atomic<unsigned> counter{0};
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("output directory does not exist: " + dir.string());
  const fs::path tmp = dir / ("." + path.filename().string() + ".tmp." + std::to_string(::getpid()) +
                              "." + std::to_string(counter++));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp, ec);
      throw IoError("write failed for " + path.string());
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move output into place: " + path.string());
  }
}

std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

}  // namespace dose
