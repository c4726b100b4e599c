#include "dose/simbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "dose/combined_select.hpp"
#include "dose/errors.hpp"
#include "dose/random_keys.hpp"

namespace dose {
namespace {

struct StrategyEntry {
  Strategy strategy;
  const char* name;
};

constexpr StrategyEntry kStrategies[] = {
    {Strategy::Random, "random"},   {Strategy::TopkX, "topk_x"},
    {Strategy::TopkY, "topk_y"},    {Strategy::TopkSum, "topk_sum"},
    {Strategy::WrsX, "wrs_x"},      {Strategy::WrsY, "wrs_y"},
    {Strategy::Dose, "dose"},       {Strategy::RegionGrid5pct, "region_grid_5pct"},
};

std::vector<std::string> top_k(const Dataset& data, std::size_t k, double wx, double wy) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto score = [&](std::size_t i) { return wx * data[i].text_quality + wy * data[i].clip_score; };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = score(a), sb = score(b);
    if (sa != sb) return sa > sb;
    return data[a].id < data[b].id;
  });
  std::vector<std::string> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(data[order[i]].id);
  return out;
}

// Equal quotas over the 3x3 score regions, uniform within each region.
// Shortfall from small regions is handed to the rest, upper-right first.
std::vector<std::string> region_stratified(const Dataset& data, std::size_t budget, std::uint64_t seed) {
  const auto grid = region_grid_report(data, 3, 3, seed, 1.0);
  std::vector<std::size_t> order(grid.cells.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::reverse(order.begin(), order.end());
  std::vector<std::size_t> quota(grid.cells.size(), 0);
  std::size_t remaining = budget;
  while (remaining > 0) {
    std::vector<std::size_t> open;
    for (std::size_t c : order) {
      if (quota[c] < grid.cells[c].count) open.push_back(c);
    }
    if (open.empty()) break;
    const std::size_t base = remaining / open.size();
    std::size_t extra = remaining % open.size();
    for (std::size_t c : open) {
      std::size_t want = base + (extra > 0 ? 1 : 0);
      if (extra > 0) --extra;
      const std::size_t take = std::min(want, grid.cells[c].count - quota[c]);
      quota[c] += take;
      remaining -= take;
    }
  }
  // sample_ids at fraction 1.0 is the full cell in uniform random order.
  std::vector<std::string> out;
  out.reserve(budget);
  for (std::size_t c = 0; c < grid.cells.size(); ++c) {
    const auto& ids = grid.cells[c].sample_ids;
    out.insert(out.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(quota[c]));
  }
  return out;
}

}  // namespace

std::string_view utility_model_name(UtilityModel m) noexcept {
  switch (m) {
    case UtilityModel::LinearInScores: return "linear_in_scores";
    case UtilityModel::ClusterCoverage: return "cluster_coverage";
    case UtilityModel::Mixed: return "mixed";
  }
  return "linear_in_scores";
}

UtilityModel parse_utility_model(std::string_view name) {
  if (name == "linear_in_scores" || name == "LINEAR_IN_SCORES") return UtilityModel::LinearInScores;
  if (name == "cluster_coverage" || name == "CLUSTER_COVERAGE") return UtilityModel::ClusterCoverage;
  if (name == "mixed" || name == "MIXED") return UtilityModel::Mixed;
  throw InvalidSpec("unknown utility model '" + std::string(name) + "'");
}

void SyntheticCorpusSpec::validate() const {
  if (n < 1) throw InvalidSpec("n must be >= 1");
  if (clusters.empty()) throw InvalidSpec("at least one cluster required");
  double total = 0.0;
  for (const auto& c : clusters) {
    if (!(c.weight >= 0.0) || !std::isfinite(c.weight)) throw InvalidSpec("cluster weight must be >= 0");
    if (!(c.spread >= 0.0) || !std::isfinite(c.spread)) throw InvalidSpec("cluster spread must be >= 0");
    if (!std::isfinite(c.center_x) || !std::isfinite(c.center_y)) throw InvalidSpec("non-finite cluster center");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidSpec("cluster weights must sum to 1");
  if (!(noise_sigma >= 0.0)) throw InvalidSpec("noise_sigma must be >= 0");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidSpec("alpha must be in [0, 1]");
}

SyntheticCorpusSpec corpus_spec_from_json(const nlohmann::json& j) {
  try {
    SyntheticCorpusSpec spec;
    spec.n = j.at("n").get<std::size_t>();
    for (const auto& c : j.at("clusters")) {
      spec.clusters.push_back({c.at("weight").get<double>(), c.at("center_x").get<double>(),
                               c.at("center_y").get<double>(), c.at("spread").get<double>()});
    }
    spec.utility_model = parse_utility_model(j.value("utility_model", "linear_in_scores"));
    spec.alpha = j.value("alpha", 0.5);
    spec.noise_sigma = j.value("noise_sigma", 0.0);
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidSpec(e.what());
  }
}

nlohmann::json to_json(const SyntheticCorpusSpec& spec) {
  auto clusters = nlohmann::json::array();
  for (const auto& c : spec.clusters) {
    clusters.push_back({{"weight", c.weight}, {"center_x", c.center_x}, {"center_y", c.center_y}, {"spread", c.spread}});
  }
  return {{"n", spec.n},
          {"clusters", std::move(clusters)},
          {"utility_model", utility_model_name(spec.utility_model)},
          {"alpha", spec.alpha},
          {"noise_sigma", spec.noise_sigma},
          {"seed", spec.seed}};
}

SyntheticCorpus generate_corpus(const SyntheticCorpusSpec& spec) {
  spec.validate();
  PortableRng rng(spec.seed);
  std::vector<double> cumulative;
  double acc = 0.0;
  for (const auto& c : spec.clusters) cumulative.push_back(acc += c.weight);

  SyntheticCorpus corpus;
  corpus.spec = spec;
  std::vector<ScoredSample> records;
  records.reserve(spec.n);
  corpus.cluster.reserve(spec.n);
  corpus.utility.reserve(spec.n);
  const int width = static_cast<int>(std::to_string(spec.n).size());
  for (std::size_t i = 0; i < spec.n; ++i) {
    const double u = rng.uniform() * acc;
    std::size_t k = static_cast<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    k = std::min(k, spec.clusters.size() - 1);
    const auto& c = spec.clusters[k];
    const double x = c.center_x + c.spread * rng.normal();
    const double y = c.center_y + c.spread * rng.normal();
    double util = 0.5 * (x + y);
    if (spec.noise_sigma > 0.0) util += spec.noise_sigma * rng.normal();
    std::ostringstream id;
    id << "item-" << std::setw(width) << std::setfill('0') << i;
    records.push_back({id.str(), x, y});
    corpus.cluster.push_back(k);
    corpus.utility.push_back(util);
  }
  corpus.data = validate_dataset(std::move(records));
  return corpus;
}

std::string_view strategy_name(Strategy s) noexcept {
  for (const auto& e : kStrategies) {
    if (e.strategy == s) return e.name;
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  for (const auto& e : kStrategies) {
    if (name == e.name) return e.strategy;
  }
  throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

const std::vector<Strategy>& all_strategies() {
  static const std::vector<Strategy> all = [] {
    std::vector<Strategy> v;
    for (const auto& e : kStrategies) v.push_back(e.strategy);
    return v;
  }();
  return all;
}

std::vector<std::string> select_with_strategy(const Dataset& data, Strategy strategy,
                                              std::size_t budget, std::uint64_t seed) {
  if (budget > data.size()) throw BudgetTooLarge(budget, data.size());
  switch (strategy) {
    case Strategy::Random:
      return trim_to_budget(data.ids(), budget, TrimRule::RandomUniform, seed);
    case Strategy::TopkX: return top_k(data, budget, 1.0, 0.0);
    case Strategy::TopkY: return top_k(data, budget, 0.0, 1.0);
    case Strategy::TopkSum: return top_k(data, budget, 1.0, 1.0);
    case Strategy::WrsX: return wrs_select_axis(data, Axis::Text, budget, seed).selected_ids;
    case Strategy::WrsY: return wrs_select_axis(data, Axis::Clip, budget, seed).selected_ids;
    case Strategy::Dose: {
      BudgetConfig b;
      b.target_size = budget;
      return dose_select(data, b, seed).selected_ids;
    }
    case Strategy::RegionGrid5pct: return region_stratified(data, budget, seed);
  }
  return {};
}

StrategyReport evaluate_selection(const SyntheticCorpus& corpus, const std::vector<std::string>& ids) {
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(corpus.data.size());
  for (std::size_t i = 0; i < corpus.data.size(); ++i) index.emplace(corpus.data[i].id, i);

  StrategyReport r;
  r.selected = ids.size();
  std::vector<std::size_t> counts(corpus.spec.clusters.size(), 0);
  double su = 0.0, sx = 0.0, sy = 0.0;
  for (const auto& id : ids) {
    const std::size_t i = index.at(id);
    su += corpus.utility[i];
    sx += corpus.data[i].text_quality;
    sy += corpus.data[i].clip_score;
    ++counts[corpus.cluster[i]];
  }
  if (!ids.empty()) {
    const double n = static_cast<double>(ids.size());
    r.quality = su / n;
    r.selected_text_mean = sx / n;
    r.selected_clip_mean = sy / n;
    for (std::size_t c : counts) {
      if (c == 0) continue;
      const double p = static_cast<double>(c) / n;
      r.coverage_entropy -= p * std::log(p);
    }
  }
  const std::size_t k = counts.size();
  r.coverage = k > 1 ? r.coverage_entropy / std::log(static_cast<double>(k)) : 1.0;
  switch (corpus.spec.utility_model) {
    case UtilityModel::LinearInScores: r.mean_utility = r.quality; break;
    case UtilityModel::ClusterCoverage: r.mean_utility = r.coverage; break;
    case UtilityModel::Mixed: r.mean_utility = mixed_utility(r, corpus.spec.alpha); break;
  }
  return r;
}

double mixed_utility(const StrategyReport& report, double alpha) noexcept {
  return alpha * report.quality + (1.0 - alpha) * report.coverage;
}

std::vector<StrategyReport> run_strategies(const SyntheticCorpus& corpus, double fraction,
                                           const std::vector<Strategy>& strategies,
                                           std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("fraction must be in (0, 1]");
  const auto budget = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(corpus.data.size()) + 1e-9));
  std::vector<StrategyReport> out;
  for (const auto s : strategies) {
    const auto start = std::chrono::steady_clock::now();
    const auto ids = select_with_strategy(corpus.data, s, budget, derive_seed(seed, strategy_name(s)));
    const auto stop = std::chrono::steady_clock::now();
    auto report = evaluate_selection(corpus, ids);
    report.strategy = std::string(strategy_name(s));
    report.runtime_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    out.push_back(std::move(report));
  }
  return out;
}

nlohmann::json to_json(const StrategyReport& r, bool include_runtime) {
  nlohmann::json j = {{"strategy", r.strategy},
                      {"selected", r.selected},
                      {"mean_utility", r.mean_utility},
                      {"quality", r.quality},
                      {"cluster_coverage_entropy", r.coverage_entropy},
                      {"coverage", r.coverage},
                      {"selected_score_means", {r.selected_text_mean, r.selected_clip_mean}}};
  if (include_runtime) j["runtime_ms"] = r.runtime_ms;
  return j;
}

std::string reports_to_csv(const std::vector<StrategyReport>& reports) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "strategy,selected,mean_utility,quality,cluster_coverage_entropy,coverage,"
         "selected_text_mean,selected_clip_mean,runtime_ms\n";
  for (const auto& r : reports) {
    out << r.strategy << ',' << r.selected << ',' << r.mean_utility << ',' << r.quality << ','
        << r.coverage_entropy << ',' << r.coverage << ',' << r.selected_text_mean << ','
        << r.selected_clip_mean << ',' << r.runtime_ms << '\n';
  }
  return out.str();
}

std::vector<AlphaPoint> alpha_sweep(const std::vector<StrategyReport>& reports,
                                    const std::vector<double>& alphas) {
  auto find = [&](std::string_view name) -> const StrategyReport& {
    for (const auto& r : reports) {
      if (r.strategy == name) return r;
    }
    throw ConfigError("alpha sweep needs a '" + std::string(name) + "' report");
  };
  const auto& dose = find("dose");
  const auto& random = find("random");
  const auto& topk = find("topk_sum");
  std::vector<AlphaPoint> out;
  for (double a : alphas) {
    out.push_back({a, mixed_utility(dose, a), mixed_utility(random, a), mixed_utility(topk, a)});
  }
  return out;
}

}  // namespace dose
