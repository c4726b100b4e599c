#include <doctest.h>

#include <cstdlib>

#include "dose/errors.hpp"
#include "dose/ingest.hpp"
#include "dose/parallel.hpp"
#include "dose/pipeline.hpp"
#include "helpers.hpp"

using namespace dose;
using testutil::TempDir;

namespace {

const std::filesystem::path kSamples = std::filesystem::path(DOSE_FIXTURE_DIR) / "samples_1000.jsonl";

PipelineConfig fixture_config(const std::filesystem::path& out) {
  PipelineConfig c;
  c.samples_path = kSamples;
  c.budget.fraction = 0.2;
  c.seed = 42;
  c.output_dir = out;
  return c;
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(DOSE_BINARY) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("yaml config: every section parses") {
  const auto c = parse_pipeline_config(R"(
input:
  scores: data/scores.jsonl
scorer:
  endpoint: http://localhost:8080
  mock_fallback: true
  batch_size: 64
  checkpoint: ckpt.jsonl
filter:
  enabled: true
  eps: 0.25
  min_pts: 5
kde:
  bandwidth: auto
  grid_points: 1024
  refine_iters: 3
sampling:
  epsilon: 1.0e-12
budget:
  fraction: 0.4
  max_candidate_size: 5000
  trim: key
  search: false
seed: 1234
output: runs/a
)");
  CHECK(c.scores_path == std::filesystem::path("data/scores.jsonl"));
  CHECK(c.scorer.endpoint == "http://localhost:8080");
  CHECK(c.scorer.mock_fallback);
  CHECK(c.scorer.batch_size == 64);
  CHECK(c.scorer.checkpoint == std::filesystem::path("ckpt.jsonl"));
  CHECK(c.filter.eps == std::optional<double>(0.25));
  CHECK(c.filter.min_pts == 5);
  CHECK_FALSE(c.select.kde.bandwidth.has_value());
  CHECK(c.select.kde.grid_points == 1024);
  CHECK(c.select.kde.refine_iters == 3);
  CHECK(c.select.epsilon == 1e-12);
  CHECK(c.budget.fraction == std::optional<double>(0.4));
  CHECK(c.budget.max_candidate_size == std::optional<std::size_t>(5000));
  CHECK(c.budget.trim_rule == TrimRule::ByCombinedKey);
  CHECK_FALSE(c.budget.budget_search);
  CHECK(c.seed == std::optional<std::uint64_t>(1234));
  CHECK(c.output_dir == std::filesystem::path("runs/a"));
}

TEST_CASE("yaml config: defaults and rejections") {
  const auto d = parse_pipeline_config("");
  CHECK_FALSE(d.filter.eps.has_value());
  CHECK(d.filter.min_pts == 8);
  CHECK(d.select.kde.grid_points == 512);
  CHECK(d.select.epsilon == 1e-10);
  CHECK(d.scorer.endpoint == "mock");
  CHECK_THROWS_AS(parse_pipeline_config("budgett: {fraction: 0.2}"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config("filter: {radius: 2}"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config("seed: [1, 2"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config("seed: minus-one"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config("budget: {trim: best}"), ConfigError);
}

TEST_CASE("config validation") {
  TempDir dir;
  PipelineConfig c;
  c.budget.fraction = 0.2;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.scores_path = dir / "missing.jsonl";
  CHECK_THROWS_AS(c.validate(), IoError);
  c.samples_path = kSamples;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.scores_path.reset();
  CHECK_NOTHROW(c.validate());
  c.budget.fraction.reset();
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("fixture run with the mock scorer selects exactly 200 ids") {
  TempDir dir;
  const auto out = run_pipeline(fixture_config(dir / "out"));
  CHECK(out.selection.selected_ids.size() == 200);
  const auto ids = read_id_list(dir / "out" / "selection.txt");
  CHECK(ids.size() == 200);
  CHECK(ids == out.selection.selected_ids);
  for (const char* f : {"selection.manifest.json", "outliers.json", "analysis.json", "scores.jsonl"}) {
    CHECK(std::filesystem::exists(dir / "out" / f));
  }
  const auto m = nlohmann::json::parse(testutil::read_file(dir / "out" / "selection.manifest.json"));
  CHECK(m.at("seed") == 42);
  CHECK(m.at("target_size") == 200);
  CHECK(m.at("dose_version") == kDoseVersion);
  CHECK(m.at("inputs").at("blake2b_128") == file_content_hash(kSamples));
  CHECK(m.at("outliers").at("input_count") == 1000);
  CHECK(m.at("axes").at("text").at("stats").contains("kde_bandwidth"));
  CHECK(m.at("axes").at("clip").at("plan").contains("mu_peak_wrs"));
  CHECK(m.at("config").at("filter").contains("eps"));
  CHECK(m.at("seed_auto_generated") == false);
}

TEST_CASE("reruns and thread counts give byte-identical outputs") {
  TempDir dir;
  std::vector<std::string> bodies;
  for (std::size_t threads : {1u, 4u, 8u, 1u}) {
    set_thread_count(threads);
    const auto sub = dir / ("t" + std::to_string(bodies.size()));
    (void)run_pipeline(fixture_config(sub));
    bodies.push_back(testutil::read_file(sub / "selection.txt") +
                     testutil::read_file(sub / "selection.manifest.json") +
                     testutil::read_file(sub / "analysis.json"));
  }
  set_thread_count(std::thread::hardware_concurrency());
  for (const auto& b : bodies) CHECK(b == bodies.front());
}

TEST_CASE("missing input fails before any output exists") {
  TempDir dir;
  auto c = fixture_config(dir / "out");
  c.samples_path = dir / "nope.jsonl";
  try {
    (void)run_pipeline(c);
    FAIL("expected an error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "config");
    CHECK(e.error_class() == ErrorClass::Io);
  }
  CHECK_FALSE(std::filesystem::exists(dir / "out"));
}

TEST_CASE("dry run resolves the plan and writes nothing") {
  TempDir dir;
  auto c = fixture_config(dir / "out");
  c.dry_run = true;
  const auto out = run_pipeline(c);
  CHECK(out.plan.at("target_size") == 200);
  CHECK(out.plan.at("candidate_search_bounds").size() == 2);
  CHECK(out.plan.at("axes").at("text").at("stats").at("kde_bandwidth").get<double>() > 0.0);
  CHECK_FALSE(std::filesystem::exists(dir / "out"));
}

TEST_CASE("omitted seed is generated and recorded") {
  TempDir dir;
  auto c = fixture_config(dir / "out");
  c.seed.reset();
  const auto out = run_pipeline(c);
  const auto m = nlohmann::json::parse(testutil::read_file(dir / "out" / "selection.manifest.json"));
  CHECK(m.at("seed_auto_generated") == true);
  CHECK(m.at("seed").get<std::uint64_t>() == out.selection.seed);
}

TEST_CASE("selection analysis reports a rightward shift") {
  const auto data = testutil::normal_dataset(5000, 0.6, 0.1, 0.3, 0.04, 5);
  BudgetConfig b;
  b.fraction = 0.2;
  const auto sel = dose_select(data, b, 3);
  const auto a = analyze_selection(data, sel.selected_ids, KdeConfig{});
  for (const char* axis : {"text", "clip"}) {
    CHECK(a.at(axis).at("mean_shift").get<double>() > 0.0);
    CHECK(a.at(axis).at("after").at("mu_peak_kde").get<double>() >
          a.at(axis).at("before").at("mu_peak_kde").get<double>());
  }
}

TEST_CASE("cli exit codes") {
  TempDir dir;
  const std::string samples = kSamples.string();
  CHECK(run_cli("--bogus") == 2);
  CHECK(run_cli("select --scores " + (dir / "none.jsonl").string() + " --fraction 0.2 --seed 1") == 3);
  CHECK(run_cli("pipeline --samples " + samples + " --fraction 3 --seed 1 --out " + (dir / "o").string()) == 2);
  CHECK(run_cli("pipeline --samples " + samples + " --fraction 0.2 --seed 1 --endpoint http://127.0.0.1:1 --out " +
                (dir / "o").string()) == 4);
  testutil::write_text(dir / "same.jsonl",
                       R"({"id":"a","text_quality":0.5,"clip_score":0.5})" "\n" R"({"id":"b","text_quality":0.5,"clip_score":0.5})" "\n");
  CHECK(run_cli("pipeline --scores " + (dir / "same.jsonl").string() + " --fraction 0.5 --seed 1 --out " +
                (dir / "ok").string()) == 0);
  testutil::write_text(dir / "empty.jsonl", "");
  CHECK(run_cli("select --scores " + (dir / "empty.jsonl").string() + " --fraction 0.5 --seed 1") == 5);
  CHECK(run_cli("pipeline --samples " + samples + " --fraction 0.2 --seed 1 --out " + (dir / "ok2").string()) == 0);
  CHECK(read_id_list(dir / "ok2" / "selection.txt").size() == 200);
}

TEST_CASE("cli flags override the config file") {
  TempDir dir;
  testutil::write_text(dir / "run.yaml", "input:\n  samples: " + kSamples.string() +
                                             "\nbudget:\n  fraction: 0.1\nseed: 5\noutput: " +
                                             (dir / "cfg").string() + "\n");
  CHECK(run_cli("pipeline --config " + (dir / "run.yaml").string()) == 0);
  CHECK(read_id_list(dir / "cfg" / "selection.txt").size() == 100);
  CHECK(run_cli("pipeline --config " + (dir / "run.yaml").string() + " --fraction 0.3 --out " +
                (dir / "flag").string()) == 0);
  CHECK(read_id_list(dir / "flag" / "selection.txt").size() == 300);
}
