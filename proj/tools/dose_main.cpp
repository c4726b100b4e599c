// dose: two-score data selection from the command line.
//
//   dose score     --samples s.jsonl --out scores.jsonl [--endpoint URL|mock]
//   dose filter    --scores scores.jsonl [--eps auto|F] [--min-pts N]
//   dose analyze   --scores scores.jsonl --axis text|clip [--grid 512] [--bandwidth auto|F]
//   dose select    --scores scores.jsonl (--fraction F | --budget N) --seed S --out sel.txt
//   dose simulate  --spec corpus.json --fraction 0.2 --seed S
//   dose pipeline  [--config run.yaml] (--scores F | --samples F) --out DIR ...
//
// Exit codes: 0 ok, 2 config error, 3 I/O error, 4 bridge error, 5 degenerate data.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dose/combined_select.hpp"
#include "dose/density.hpp"
#include "dose/ingest.hpp"
#include "dose/outlier_filter.hpp"
#include "dose/parallel.hpp"
#include "dose/pipeline.hpp"
#include "dose/prompt_scoring.hpp"
#include "dose/simbench.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitBridge = 4;
constexpr int kExitDegenerate = 5;

int exit_code_for(dose::ErrorClass cls) {
  switch (cls) {
    case dose::ErrorClass::Config: return kExitConfig;
    case dose::ErrorClass::Io: return kExitIo;
    case dose::ErrorClass::Bridge: return kExitBridge;
    case dose::ErrorClass::Degenerate: return kExitDegenerate;
  }
  return kExitConfig;
}

// "auto" -> nullopt, otherwise a positive number.
std::optional<double> parse_auto(const std::string& text, const char* what) {
  if (text == "auto") return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw dose::ConfigError(std::string(what) + " must be 'auto' or a number, got '" + text + "'");
  }
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    dose::write_file_atomic(out_path, text);
  }
}

std::string grid_csv(const std::vector<dose::GridPoint>& grid) {
  std::ostringstream out;
  out.precision(17);
  out << "position,density\n";
  for (const auto& g : grid) out << g.position << ',' << g.density << '\n';
  return out.str();
}

struct ScoreArgs {
  std::string samples, out, checkpoint;
  std::string endpoint;
  std::size_t batch_size = dose::kMaxBridgeBatch, max_in_flight = 4, retries = 2;
  bool mock_fallback = false, drop_failed = false;
};

struct FilterArgs {
  std::string scores, eps = "auto", out, report;
  std::size_t min_pts = dose::kDefaultMinPts;
};

struct AnalyzeArgs {
  std::string scores, axis = "text", bandwidth = "auto", selection, format = "json", out;
  std::size_t grid = 512, refine = 2;
  bool region_grid = false;
  std::size_t rows = 3, cols = 3;
  std::uint64_t seed = 0;
};

struct SelectArgs {
  std::string scores, out = "selection.txt", trim = "random", axis, bandwidth = "auto", weights_out;
  double fraction = 0.0;
  std::size_t budget = 0, m = 0, grid = 512, refine = 2, max_candidates = 0;
  std::uint64_t seed = 0;
  double epsilon = dose::kDefaultEpsilon;
  bool no_budget_search = false, dry_run = false;
};

struct SimulateArgs {
  std::string spec, out_json, out_csv, strategies;
  double fraction = 0.2;
  std::uint64_t seed = 0;
};

struct PipelineArgs {
  std::string config, scores, samples, endpoint, checkpoint, eps, bandwidth, trim, out;
  std::size_t min_pts = 0, grid = 0, refine = 0, budget = 0, max_candidates = 0;
  double fraction = 0.0, epsilon = 0.0;
  std::uint64_t seed = 0;
  bool no_filter = false, no_budget_search = false, dry_run = false, mock_fallback = false, drop_failed = false;
};

int run_score(const ScoreArgs& a) {
  dose::ScorerOptions opts;
  opts.endpoint = a.endpoint;
  opts.batch_size = a.batch_size;
  opts.max_in_flight = a.max_in_flight;
  opts.max_retries = a.retries;
  opts.mock_fallback = a.mock_fallback;
  if (!a.checkpoint.empty()) opts.checkpoint = a.checkpoint;
  const auto samples = dose::read_samples(a.samples);
  auto run = dose::score_samples(samples, opts, a.drop_failed);
  dose::write_scores(run.dataset, a.out);
  for (const auto& f : run.outcome.failures) {
    std::cerr << "failed: " << f.id << " [" << dose::score_kind_name(f.kind) << "] " << f.reason
              << " (attempts: " << f.attempts << ")\n";
  }
  std::cerr << "scored " << run.dataset.size() << " samples (" << run.outcome.resumed
            << " resumed, " << run.dropped << " dropped) with " << run.outcome.scorer << "\n";
  return kExitOk;
}

int run_filter(const FilterArgs& a) {
  const auto data = dose::load_dataset(a.scores);
  dose::DbscanParams params;
  params.eps = parse_auto(a.eps, "--eps");
  params.min_pts = a.min_pts;
  const auto [kept, report] = dose::filter_outliers(data, params);
  if (!a.out.empty()) dose::write_scores(kept, a.out);
  emit(dose::dump_json(dose::to_json(report)), a.report);
  return kExitOk;
}

int run_analyze(const AnalyzeArgs& a) {
  const auto data = dose::load_dataset(a.scores);
  if (a.region_grid) {
    const auto rep = dose::region_grid_report(data, a.rows, a.cols, a.seed);
    emit(dose::dump_json(dose::to_json(rep)), a.out);
    return kExitOk;
  }
  dose::KdeConfig kde;
  kde.bandwidth = parse_auto(a.bandwidth, "--bandwidth");
  kde.grid_points = a.grid;
  kde.refine_iters = a.refine;
  const auto axis = dose::parse_axis(a.axis);
  if (!a.selection.empty()) {
    const auto ids = dose::read_id_list(a.selection);
    const auto analysis = dose::analyze_selection(data, ids, kde);
    if (a.format == "csv") {
      const auto& entry = analysis.at(std::string(dose::axis_name(axis)));
      // Long format: the two grids span different ranges.
      std::ostringstream out;
      out.precision(17);
      out << "which,position,density\n";
      for (const char* which : {"before", "after"}) {
        const auto& side = entry.at(which);
        if (side.is_null()) continue;
        for (const auto& g : side.at("kde_grid")) {
          out << which << ',' << g[0].get<double>() << ',' << g[1].get<double>() << '\n';
        }
      }
      emit(out.str(), a.out);
    } else {
      emit(dose::dump_json(analysis), a.out);
    }
    return kExitOk;
  }
  const auto stats = dose::compute_stats(axis, data.scores(axis), kde);
  if (a.format == "csv") {
    emit(grid_csv(stats.kde_grid), a.out);
  } else {
    emit(dose::dump_json(dose::to_json(stats, true)), a.out);
  }
  return kExitOk;
}

int run_select(const SelectArgs& a, const CLI::App& cmd) {
  const auto data = dose::load_dataset(a.scores);
  dose::SelectOptions options;
  options.kde.bandwidth = parse_auto(a.bandwidth, "--bandwidth");
  options.kde.grid_points = a.grid;
  options.kde.refine_iters = a.refine;
  options.epsilon = a.epsilon;

  if (!a.axis.empty()) {
    const auto axis = dose::parse_axis(a.axis);
    std::size_t m = a.m;
    if (cmd.count("--fraction")) {
      m = static_cast<std::size_t>(std::floor(a.fraction * static_cast<double>(data.size()) + 1e-9));
    } else if (cmd.count("--budget")) {
      m = a.budget;
    } else if (!cmd.count("--m")) {
      throw dose::ConfigError("single-axis select needs --m, --budget or --fraction");
    }
    if (!a.weights_out.empty()) {
      dose::write_weight_table(dose::plan_axis(data, axis, options).weights, a.weights_out);
    }
    if (a.dry_run) {
      const auto o = dose::plan_axis(data, axis, options);
      std::cout << dose::dump_json({{"stats", dose::to_json(o.stats)},
                                    {"plan", o.plan ? dose::to_json(*o.plan) : nlohmann::json(nullptr)},
                                    {"m", m}});
      return kExitOk;
    }
    const auto result = dose::wrs_select_axis(data, axis, m, a.seed, options);
    dose::write_selection(result, a.out);
    return kExitOk;
  }

  dose::BudgetConfig budget;
  if (cmd.count("--budget")) budget.target_size = a.budget;
  if (cmd.count("--fraction")) budget.fraction = a.fraction;
  if (cmd.count("--max-candidates")) budget.max_candidate_size = a.max_candidates;
  budget.trim_rule = dose::parse_trim_rule(a.trim);
  budget.budget_search = !a.no_budget_search;
  if (a.dry_run) {
    nlohmann::json plan = {{"target_size", budget.resolve(data.size())}, {"seed", a.seed}};
    for (const auto axis : {dose::Axis::Text, dose::Axis::Clip}) {
      const auto o = dose::plan_axis(data, axis, options);
      plan["axes"][std::string(dose::axis_name(axis))] = {
          {"stats", dose::to_json(o.stats)},
          {"plan", o.plan ? dose::to_json(*o.plan) : nlohmann::json(nullptr)}};
    }
    std::cout << dose::dump_json(plan);
    return kExitOk;
  }
  const auto result = dose::dose_select(data, budget, a.seed, options);
  dose::write_selection(result, a.out);
  return kExitOk;
}

int run_simulate(const SimulateArgs& a) {
  std::ifstream in(a.spec);
  if (!in) throw dose::IoError("cannot open spec " + a.spec);
  nlohmann::json spec_json;
  try {
    spec_json = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw dose::InvalidSpec(e.what());
  }
  const auto corpus = dose::generate_corpus(dose::corpus_spec_from_json(spec_json));
  std::vector<dose::Strategy> strategies = dose::all_strategies();
  if (!a.strategies.empty()) {
    strategies.clear();
    std::stringstream ss(a.strategies);
    for (std::string name; std::getline(ss, name, ',');) strategies.push_back(dose::parse_strategy(name));
  }
  const auto reports = dose::run_strategies(corpus, a.fraction, strategies, a.seed);
  nlohmann::json out = {{"spec", dose::to_json(corpus.spec)}, {"fraction", a.fraction}, {"seed", a.seed}};
  for (const auto& r : reports) out["reports"].push_back(dose::to_json(r));
  bool has_sweep_inputs = true;
  for (const char* name : {"dose", "random", "topk_sum"}) {
    has_sweep_inputs = has_sweep_inputs && std::any_of(reports.begin(), reports.end(),
                                                       [&](const auto& r) { return r.strategy == name; });
  }
  if (has_sweep_inputs) {
    std::vector<double> alphas;
    for (int i = 0; i <= 20; ++i) alphas.push_back(i / 20.0);
    for (const auto& p : dose::alpha_sweep(reports, alphas)) {
      out["alpha_sweep"].push_back(
          {{"alpha", p.alpha}, {"dose", p.dose}, {"random", p.random}, {"topk_sum", p.topk}, {"dose_wins", p.dose_wins()}});
    }
  }
  if (!a.out_csv.empty()) dose::write_file_atomic(a.out_csv, dose::reports_to_csv(reports));
  emit(dose::dump_json(out), a.out_json);
  return kExitOk;
}

int run_pipeline_cmd(const PipelineArgs& a, const CLI::App& cmd) {
  dose::PipelineConfig config;
  if (!a.config.empty()) config = dose::load_pipeline_config(a.config);
  if (const char* url = std::getenv("DOSE_BRIDGE_URL"); url && *url && a.config.empty()) {
    config.scorer.endpoint = url;
  }
  if (cmd.count("--scores")) {
    config.scores_path = a.scores;
    config.samples_path.reset();
  }
  if (cmd.count("--samples")) {
    config.samples_path = a.samples;
    config.scores_path.reset();
  }
  if (cmd.count("--endpoint")) config.scorer.endpoint = a.endpoint;
  if (cmd.count("--checkpoint")) config.scorer.checkpoint = a.checkpoint;
  if (cmd.count("--mock-fallback")) config.scorer.mock_fallback = true;
  if (cmd.count("--drop-failed")) config.drop_failed = true;
  if (cmd.count("--no-filter")) config.filter_enabled = false;
  if (cmd.count("--eps")) config.filter.eps = parse_auto(a.eps, "--eps");
  if (cmd.count("--min-pts")) config.filter.min_pts = a.min_pts;
  if (cmd.count("--grid")) config.select.kde.grid_points = a.grid;
  if (cmd.count("--refine")) config.select.kde.refine_iters = a.refine;
  if (cmd.count("--bandwidth")) config.select.kde.bandwidth = parse_auto(a.bandwidth, "--bandwidth");
  if (cmd.count("--epsilon")) config.select.epsilon = a.epsilon;
  if (cmd.count("--fraction")) {
    config.budget.fraction = a.fraction;
    config.budget.target_size.reset();
  }
  if (cmd.count("--budget")) {
    config.budget.target_size = a.budget;
    config.budget.fraction.reset();
  }
  if (cmd.count("--max-candidates")) config.budget.max_candidate_size = a.max_candidates;
  if (cmd.count("--trim")) config.budget.trim_rule = dose::parse_trim_rule(a.trim);
  if (cmd.count("--no-budget-search")) config.budget.budget_search = false;
  if (cmd.count("--seed")) config.seed = a.seed;
  if (cmd.count("--out")) config.output_dir = a.out;
  config.dry_run = a.dry_run;

  const auto outcome = dose::run_pipeline(config);
  if (config.dry_run) {
    std::cout << dose::dump_json(outcome.plan);
    return kExitOk;
  }
  std::cerr << "selected " << outcome.selection.selected_ids.size() << " of "
            << outcome.selection.manifest.value("input_count", std::size_t{0}) << " (M' = "
            << outcome.selection.per_axis_candidate_size << ", seed " << outcome.selection.seed
            << ") -> " << outcome.selection_path.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dose: two-score weighted data selection"};
  app.require_subcommand(1);
  app.fallthrough();

  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker thread cap (default: DOSE_THREADS or all cores)");

  ScoreArgs score_args;
  if (const char* url = std::getenv("DOSE_BRIDGE_URL"); url && *url) score_args.endpoint = url;
  if (score_args.endpoint.empty()) score_args.endpoint = "mock";
  auto* score = app.add_subcommand("score", "Score samples through the bridge or the mock scorer");
  score->add_option("--samples", score_args.samples, "Samples JSONL")->required();
  score->add_option("--out", score_args.out, "Scores JSONL to write")->required();
  score->add_option("--endpoint", score_args.endpoint, "Bridge URL or 'mock' (default: DOSE_BRIDGE_URL or mock)");
  score->add_option("--checkpoint", score_args.checkpoint, "Resumable JSONL checkpoint");
  score->add_option("--batch-size", score_args.batch_size, "Requests per bridge call (<= 256)");
  score->add_option("--max-in-flight", score_args.max_in_flight, "Concurrent bridge calls");
  score->add_option("--retries", score_args.retries, "Retries per batch");
  score->add_flag("--mock-fallback", score_args.mock_fallback, "Use the mock scorer if the bridge is down");
  score->add_flag("--drop-failed", score_args.drop_failed, "Drop samples whose scoring failed");

  FilterArgs filter_args;
  auto* filter = app.add_subcommand("filter", "DBSCAN outlier filter; prints the outlier report");
  filter->add_option("--scores", filter_args.scores, "Scores JSONL")->required();
  filter->add_option("--eps", filter_args.eps, "Neighbourhood radius in standard deviations, or 'auto'");
  filter->add_option("--min-pts", filter_args.min_pts, "DBSCAN min_pts");
  filter->add_option("--out", filter_args.out, "Write the filtered scores here");
  filter->add_option("--report", filter_args.report, "Write the report here instead of stdout");

  AnalyzeArgs analyze_args;
  auto* analyze = app.add_subcommand("analyze", "KDE grid, mode and before/after comparison");
  analyze->add_option("--scores", analyze_args.scores, "Scores JSONL")->required();
  analyze->add_option("--axis", analyze_args.axis, "text|clip");
  analyze->add_option("--grid", analyze_args.grid, "KDE grid points");
  analyze->add_option("--refine", analyze_args.refine, "Mode refinement rounds");
  analyze->add_option("--bandwidth", analyze_args.bandwidth, "KDE bandwidth or 'auto'");
  analyze->add_option("--selection", analyze_args.selection, "Id list; compare the subset to the population");
  analyze->add_option("--format", analyze_args.format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
  analyze->add_option("--out", analyze_args.out, "Output file (default stdout)");
  analyze->add_flag("--region-grid", analyze_args.region_grid, "Region grid report instead of a KDE");
  analyze->add_option("--rows", analyze_args.rows, "Region grid rows (text quality bins)");
  analyze->add_option("--cols", analyze_args.cols, "Region grid columns (clip score bins)");
  analyze->add_option("--seed", analyze_args.seed, "Seed for the per-region samples");

  SelectArgs select_args;
  auto* select = app.add_subcommand("select", "Weighted selection on both axes (or one, with --axis)");
  select->add_option("--scores", select_args.scores, "Scores JSONL")->required();
  auto* frac_opt = select->add_option("--fraction", select_args.fraction, "Budget as a fraction of N");
  auto* budget_opt = select->add_option("--budget", select_args.budget, "Budget as a count");
  frac_opt->excludes(budget_opt);
  select->add_option("--seed", select_args.seed, "Sampling seed")->required();
  select->add_option("--trim", select_args.trim, "random|key")->check(CLI::IsMember({"random", "key"}));
  select->add_option("--axis", select_args.axis, "Single-axis mode: text|clip");
  select->add_option("--m", select_args.m, "Single-axis sample size");
  select->add_option("--max-candidates", select_args.max_candidates, "Upper bound on M'");
  select->add_option("--grid", select_args.grid, "KDE grid points");
  select->add_option("--refine", select_args.refine, "Mode refinement rounds");
  select->add_option("--bandwidth", select_args.bandwidth, "KDE bandwidth or 'auto'");
  select->add_option("--epsilon", select_args.epsilon, "Weight denominator guard");
  select->add_option("--weights-out", select_args.weights_out, "Export the weight table (single-axis mode)");
  select->add_option("--out", select_args.out, "Id file; the manifest goes beside it");
  select->add_flag("--no-budget-search", select_args.no_budget_search, "Take M = B and keep the raw intersection");
  select->add_flag("--dry-run", select_args.dry_run, "Print the resolved plan only");

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Compare strategies on a synthetic corpus");
  simulate->add_option("--spec", sim_args.spec, "Corpus spec JSON")->required();
  simulate->add_option("--fraction", sim_args.fraction, "Selection fraction");
  simulate->add_option("--seed", sim_args.seed, "Master seed");
  simulate->add_option("--strategies", sim_args.strategies, "Comma-separated subset of strategies");
  simulate->add_option("--out", sim_args.out_json, "Report JSON (default stdout)");
  simulate->add_option("--csv", sim_args.out_csv, "Also write the report table as CSV");

  PipelineArgs pl;
  auto* pipeline = app.add_subcommand("pipeline", "Score/load, filter, select, write artifacts");
  pipeline->add_option("--config", pl.config, "YAML config; flags override it");
  pipeline->add_option("--scores", pl.scores, "Scores JSONL");
  pipeline->add_option("--samples", pl.samples, "Samples JSONL (scored first)");
  pipeline->add_option("--endpoint", pl.endpoint, "Bridge URL or 'mock'");
  pipeline->add_option("--checkpoint", pl.checkpoint, "Scoring checkpoint JSONL");
  pipeline->add_flag("--mock-fallback", pl.mock_fallback, "Use the mock scorer if the bridge is down");
  pipeline->add_flag("--drop-failed", pl.drop_failed, "Drop samples whose scoring failed");
  pipeline->add_flag("--no-filter", pl.no_filter, "Skip the outlier filter");
  pipeline->add_option("--eps", pl.eps, "DBSCAN eps or 'auto'");
  pipeline->add_option("--min-pts", pl.min_pts, "DBSCAN min_pts");
  pipeline->add_option("--grid", pl.grid, "KDE grid points");
  pipeline->add_option("--refine", pl.refine, "Mode refinement rounds");
  pipeline->add_option("--bandwidth", pl.bandwidth, "KDE bandwidth or 'auto'");
  pipeline->add_option("--epsilon", pl.epsilon, "Weight denominator guard");
  auto* pl_frac = pipeline->add_option("--fraction", pl.fraction, "Budget as a fraction of N");
  auto* pl_budget = pipeline->add_option("--budget", pl.budget, "Budget as a count");
  pl_frac->excludes(pl_budget);
  pipeline->add_option("--max-candidates", pl.max_candidates, "Upper bound on M'");
  pipeline->add_option("--trim", pl.trim, "random|key")->check(CLI::IsMember({"random", "key"}));
  pipeline->add_flag("--no-budget-search", pl.no_budget_search, "Take M = B and keep the raw intersection");
  pipeline->add_option("--seed", pl.seed, "Sampling seed (generated and recorded if omitted)");
  pipeline->add_option("--out", pl.out, "Output directory");
  pipeline->add_flag("--dry-run", pl.dry_run, "Print the resolved plan without writing outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  if (app.count("--threads")) {
    dose::set_thread_count(threads);
  } else if (const char* env = std::getenv("DOSE_THREADS"); env && *env) {
    dose::set_thread_count(static_cast<std::size_t>(std::strtoull(env, nullptr, 10)));
  }

  try {
    if (*score) return run_score(score_args);
    if (*filter) return run_filter(filter_args);
    if (*analyze) return run_analyze(analyze_args);
    if (*select) return run_select(select_args, *select);
    if (*simulate) return run_simulate(sim_args);
    if (*pipeline) return run_pipeline_cmd(pl, *pipeline);
  } catch (const dose::StageError& e) {
    std::cerr << "error [" << e.stage() << "]: " << e.what() << "\n";
    return exit_code_for(e.error_class());
  } catch (const dose::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.error_class());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitConfig;
}
