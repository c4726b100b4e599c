#include "dose/pipeline.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <unordered_set>

#include "dose/density.hpp"
#include "dose/ingest.hpp"
#include "dose/random_keys.hpp"

namespace fs = std::filesystem;

namespace dose {
namespace {

template <typename Fn>
auto in_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  }
}

void reject_unknown(const YAML::Node& node, const std::string& where, std::set<std::string> allowed) {
  if (!node) return;
  if (!node.IsMap()) throw ConfigError("config: '" + where + "' must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError("config: unknown key '" + where + "." + key + "'");
  }
}

template <typename T>
void read_if(const YAML::Node& node, const char* key, T& out) {
  if (node && node[key]) out = node[key].as<T>();
}

template <typename T>
void read_opt(const YAML::Node& node, const char* key, std::optional<T>& out) {
  if (node && node[key] && !node[key].IsNull()) out = node[key].as<T>();
}

// "auto" or a number.
std::optional<double> read_auto_or_number(const YAML::Node& node, const char* key,
                                          std::optional<double> current) {
  if (!node || !node[key]) return current;
  const auto text = node[key].as<std::string>();
  if (text == "auto") return std::nullopt;
  return node[key].as<double>();
}

nlohmann::json optional_json(const std::optional<double>& v, const char* none) {
  return v ? nlohmann::json(*v) : nlohmann::json(none);
}

}  // namespace

void PipelineConfig::validate() const {
  if (scores_path.has_value() == samples_path.has_value()) {
    throw ConfigError("exactly one of scores / samples input must be given");
  }
  const fs::path& input = scores_path ? *scores_path : *samples_path;
  std::error_code ec;
  if (!fs::is_regular_file(input, ec)) throw IoError("input file not found: " + input.string());
  if (!budget.target_size && !budget.fraction) throw ConfigError("budget needs --fraction or --budget");
  filter.validate();
  select.kde.validate();
  if (!(select.epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
}

PipelineConfig parse_pipeline_config(const std::string& yaml_text) {
  PipelineConfig c;
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!root || root.IsNull()) return c;
  try {
    reject_unknown(root, "", {"input", "scorer", "filter", "kde", "sampling", "budget", "seed", "output"});
    const auto input = root["input"];
    reject_unknown(input, "input", {"scores", "samples"});
    if (input && input["scores"]) c.scores_path = input["scores"].as<std::string>();
    if (input && input["samples"]) c.samples_path = input["samples"].as<std::string>();

    const auto scorer = root["scorer"];
    reject_unknown(scorer, "scorer", {"endpoint", "mock_fallback", "batch_size", "max_in_flight",
                                      "max_retries", "timeout_seconds", "checkpoint", "drop_failed"});
    read_if(scorer, "endpoint", c.scorer.endpoint);
    read_if(scorer, "mock_fallback", c.scorer.mock_fallback);
    read_if(scorer, "batch_size", c.scorer.batch_size);
    read_if(scorer, "max_in_flight", c.scorer.max_in_flight);
    read_if(scorer, "max_retries", c.scorer.max_retries);
    read_if(scorer, "timeout_seconds", c.scorer.timeout_seconds);
    read_if(scorer, "drop_failed", c.drop_failed);
    if (scorer && scorer["checkpoint"]) c.scorer.checkpoint = scorer["checkpoint"].as<std::string>();

    const auto filter = root["filter"];
    reject_unknown(filter, "filter", {"enabled", "eps", "min_pts"});
    read_if(filter, "enabled", c.filter_enabled);
    c.filter.eps = read_auto_or_number(filter, "eps", c.filter.eps);
    read_if(filter, "min_pts", c.filter.min_pts);

    const auto kde = root["kde"];
    reject_unknown(kde, "kde", {"bandwidth", "grid_points", "refine_iters"});
    c.select.kde.bandwidth = read_auto_or_number(kde, "bandwidth", c.select.kde.bandwidth);
    read_if(kde, "grid_points", c.select.kde.grid_points);
    read_if(kde, "refine_iters", c.select.kde.refine_iters);

    const auto sampling = root["sampling"];
    reject_unknown(sampling, "sampling", {"epsilon"});
    read_if(sampling, "epsilon", c.select.epsilon);

    const auto budget = root["budget"];
    reject_unknown(budget, "budget", {"fraction", "target_size", "max_candidate_size", "trim", "search"});
    read_opt(budget, "fraction", c.budget.fraction);
    read_opt(budget, "target_size", c.budget.target_size);
    read_opt(budget, "max_candidate_size", c.budget.max_candidate_size);
    if (budget && budget["trim"]) c.budget.trim_rule = parse_trim_rule(budget["trim"].as<std::string>());
    read_if(budget, "search", c.budget.budget_search);

    if (root["seed"]) c.seed = root["seed"].as<std::uint64_t>();
    if (root["output"]) c.output_dir = root["output"].as<std::string>();
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_pipeline_config(text);
}

nlohmann::json config_echo(const PipelineConfig& c) {
  nlohmann::json input;
  if (c.scores_path) input["scores"] = c.scores_path->string();
  if (c.samples_path) input["samples"] = c.samples_path->string();
  return {
      {"input", input},
      {"scorer",
       {{"endpoint", c.scorer.endpoint},
        {"mock_fallback", c.scorer.mock_fallback},
        {"batch_size", c.scorer.batch_size},
        {"max_in_flight", c.scorer.max_in_flight},
        {"max_retries", c.scorer.max_retries},
        {"drop_failed", c.drop_failed}}},
      {"filter",
       {{"enabled", c.filter_enabled}, {"eps", optional_json(c.filter.eps, "auto")}, {"min_pts", c.filter.min_pts}}},
      {"kde",
       {{"bandwidth", optional_json(c.select.kde.bandwidth, "auto")},
        {"grid_points", c.select.kde.grid_points},
        {"refine_iters", c.select.kde.refine_iters}}},
      {"sampling", {{"epsilon", c.select.epsilon}}},
      {"budget",
       {{"fraction", c.budget.fraction ? nlohmann::json(*c.budget.fraction) : nlohmann::json(nullptr)},
        {"target_size", c.budget.target_size ? nlohmann::json(*c.budget.target_size) : nlohmann::json(nullptr)},
        {"max_candidate_size",
         c.budget.max_candidate_size ? nlohmann::json(*c.budget.max_candidate_size) : nlohmann::json(nullptr)},
        {"trim", trim_rule_name(c.budget.trim_rule)},
        {"search", c.budget.budget_search}}},
  };
}

std::string file_content_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  ContentHasher hasher;
  std::string buf(1 << 16, '\0');
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    hasher.update(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())));
  }
  return hasher.hex_digest();
}

nlohmann::json analyze_selection(const Dataset& population, const std::vector<std::string>& selected,
                                 const KdeConfig& kde) {
  const std::unordered_set<std::string> chosen(selected.begin(), selected.end());
  std::vector<bool> keep(population.size());
  for (std::size_t i = 0; i < population.size(); ++i) keep[i] = chosen.count(population[i].id) > 0;
  const Dataset subset = population.subset(keep);

  nlohmann::json out = {{"population_size", population.size()}, {"selected_size", subset.size()}};
  for (const Axis axis : {Axis::Text, Axis::Clip}) {
    const auto before = compute_stats(axis, population.scores(axis), kde);
    nlohmann::json entry = {{"before", to_json(before, true)}};
    if (!subset.empty()) {
      KdeConfig sub = kde;
      // Same bandwidth on both sides so the curves are comparable.
      if (before.kde_bandwidth > 0.0) sub.bandwidth = before.kde_bandwidth;
      const auto after = compute_stats(axis, subset.scores(axis), sub);
      entry["after"] = to_json(after, true);
      entry["mean_shift"] = after.mu_data - before.mu_data;
      entry["mean_shift_sigmas"] = before.sigma_data > 0.0 ? (after.mu_data - before.mu_data) / before.sigma_data : 0.0;
      entry["mode_shift"] = after.mu_peak_kde - before.mu_peak_kde;
    } else {
      entry["after"] = nullptr;
    }
    out[std::string(axis_name(axis))] = std::move(entry);
  }
  return out;
}

PipelineOutcome run_pipeline(const PipelineConfig& config) {
  in_stage("config", [&] { config.validate(); });
  PipelineOutcome outcome;

  const std::uint64_t seed = config.seed ? *config.seed : std::random_device{}() * 0x100000000ULL + std::random_device{}();
  const fs::path input = config.scores_path ? *config.scores_path : *config.samples_path;
  const std::string input_hash = in_stage("load", [&] { return file_content_hash(input); });

  nlohmann::json scoring_info = nullptr;
  Dataset data = config.scores_path
                     ? in_stage("load", [&] { return load_dataset(*config.scores_path); })
                     : in_stage("score", [&] {
                         const auto samples = read_samples(*config.samples_path);
                         auto run = score_samples(samples, config.scorer, config.drop_failed);
                         scoring_info = {{"scorer", run.outcome.scorer},
                                         {"health", run.outcome.health},
                                         {"resumed", run.outcome.resumed},
                                         {"dropped", run.dropped},
                                         {"failures", run.outcome.failures.size()}};
                         return std::move(run.dataset);
                       });

  Dataset filtered = data;
  if (config.filter_enabled) {
    std::tie(filtered, outcome.outliers) =
        in_stage("filter", [&] { return filter_outliers(data, config.filter); });
  } else {
    outcome.outliers.input_count = data.size();
  }

  // A fraction is a share of the whole input, so outlier removal does not shrink the budget.
  BudgetConfig budget = config.budget;
  const std::size_t target = in_stage("select", [&] {
    if (budget.target_size) return budget.resolve(filtered.size());
    const std::size_t b = std::min(budget.resolve(data.size()), filtered.size());
    budget.target_size = b;
    return b;
  });
  outcome.plan = in_stage("select", [&] {
    nlohmann::json plan = {{"seed", seed},
                           {"input_count", data.size()},
                           {"filtered_count", filtered.size()},
                           {"outliers_removed", outcome.outliers.removed_count},
                           {"dbscan_eps", outcome.outliers.eps},
                           {"target_size", target},
                           {"candidate_search_bounds",
                            {target, std::min(filtered.size(), budget.max_candidate_size.value_or(filtered.size()))}}};
    for (const Axis axis : {Axis::Text, Axis::Clip}) {
      const auto o = plan_axis(filtered, axis, config.select);
      plan["axes"][std::string(axis_name(axis))] = {
          {"stats", to_json(o.stats)},
          {"plan", o.plan ? to_json(*o.plan) : nlohmann::json(nullptr)},
          {"uniform_fallback", !o.plan.has_value()}};
    }
    return plan;
  });
  if (config.dry_run) return outcome;

  outcome.selection = in_stage("select", [&] { return dose_select(filtered, budget, seed, config.select); });
  outcome.analysis = in_stage("analyze", [&] {
    return analyze_selection(filtered, outcome.selection.selected_ids, config.select.kde);
  });

  auto& manifest = outcome.selection.manifest;
  manifest["dose_version"] = kDoseVersion;
  manifest["config"] = config_echo(config);
  manifest["inputs"] = {{"path", input.string()}, {"blake2b_128", input_hash}};
  manifest["outliers"] = to_json(outcome.outliers);
  manifest["scoring"] = scoring_info;
  manifest["seed_auto_generated"] = !config.seed.has_value();

  in_stage("write", [&] {
    std::error_code ec;
    fs::create_directories(config.output_dir, ec);
    if (ec) throw IoError("cannot create output directory " + config.output_dir.string());
    if (config.samples_path) write_scores(data, config.output_dir / "scores.jsonl");
    write_file_atomic(config.output_dir / "outliers.json", dump_json(to_json(outcome.outliers)));
    write_file_atomic(config.output_dir / "analysis.json", dump_json(outcome.analysis));
    outcome.selection_path = config.output_dir / "selection.txt";
    write_selection(outcome.selection, outcome.selection_path);
  });
  return outcome;
}

}  // namespace dose
