#include "dose/density.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dose/errors.hpp"
#include "dose/parallel.hpp"

namespace dose {
namespace {

// exp(-t^2/2) is exactly 0.0 in double precision beyond |t| ~ 38.6.
constexpr double kKernelCutoff = 38.7;

const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);

double grid_position(double lo, double hi, std::size_t i, std::size_t n) {
  if (i + 1 == n) return hi;
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
}

}  // namespace

void KdeConfig::validate() const {
  if (bandwidth && !(*bandwidth > 0.0)) throw NonPositiveBandwidth(*bandwidth);
  if (grid_points < 16) throw ConfigError("grid_points must be >= 16");
}

AxisStats axis_stats(std::span<const double> scores) {
  if (scores.empty()) throw EmptyDataset();
  AxisStats s;
  s.min = scores.front();
  s.max = scores.front();
  double sum = 0.0;
  for (double v : scores) {
    sum += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  const double n = static_cast<double>(scores.size());
  s.mu = sum / n;
  double ss = 0.0;
  for (double v : scores) ss += (v - s.mu) * (v - s.mu);
  s.sigma = s.min == s.max ? 0.0 : std::sqrt(ss / n);
  return s;
}

double std_normal_pdf(double t) noexcept { return kInvSqrt2Pi * std::exp(-0.5 * t * t); }

double kde_evaluate(std::span<const double> scores, double x, double h) {
  if (!(h > 0.0)) throw NonPositiveBandwidth(h);
  if (scores.empty()) throw EmptyDataset();
  double acc = 0.0;
  for (double xi : scores) acc += std_normal_pdf((x - xi) / h);
  return acc / (static_cast<double>(scores.size()) * h);
}

double auto_bandwidth(std::span<const double> scores) {
  if (scores.size() < 2) throw DegenerateData("bandwidth selection needs at least 2 scores");
  const auto s = axis_stats(scores);
  if (s.sigma == 0.0) throw DegenerateData("bandwidth selection needs sigma_data > 0");
  return 1.06 * s.sigma * std::pow(static_cast<double>(scores.size()), -0.2);
}

KdeEvaluator::KdeEvaluator(std::span<const double> scores, double h)
    : sorted_(scores.begin(), scores.end()), h_(h) {
  if (!(h > 0.0)) throw NonPositiveBandwidth(h);
  if (sorted_.empty()) throw EmptyDataset();
  std::sort(sorted_.begin(), sorted_.end());
  norm_ = 1.0 / (static_cast<double>(sorted_.size()) * h_);
}

double KdeEvaluator::operator()(double x) const {
  const double reach = kKernelCutoff * h_;
  const auto lo = std::lower_bound(sorted_.begin(), sorted_.end(), x - reach);
  const auto hi = std::upper_bound(lo, sorted_.end(), x + reach);
  double acc = 0.0;
  for (auto it = lo; it != hi; ++it) acc += std_normal_pdf((x - *it) / h_);
  return acc * norm_;
}

std::vector<GridPoint> KdeEvaluator::grid(double lo, double hi, std::size_t n) const {
  std::vector<GridPoint> out(n);
  parallel_for(
      n,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          const double x = grid_position(lo, hi, i, n);
          out[i] = {x, (*this)(x)};
        }
      },
      8);
  return out;
}

ModeResult find_mode(std::span<const double> scores, const KdeConfig& config) {
  config.validate();
  const auto stats = axis_stats(scores);
  ModeResult result;
  if (stats.min == stats.max) {
    result.mode = stats.min;
    result.grid = {{stats.min, 0.0}};
    result.evaluated = result.grid;
    return result;
  }

  const double h = config.bandwidth ? *config.bandwidth : auto_bandwidth(scores);
  const KdeEvaluator kde(scores, h);
  result.bandwidth = h;
  result.grid = kde.grid(stats.min, stats.max, config.grid_points);
  result.evaluated = result.grid;

  auto argmax = [](const std::vector<GridPoint>& pts) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if (pts[i].density > pts[best].density ||
          (pts[i].density == pts[best].density && pts[i].position < pts[best].position)) {
        best = i;
      }
    }
    return pts[best];
  };

  GridPoint incumbent = argmax(result.grid);
  double spacing = (stats.max - stats.min) / static_cast<double>(config.grid_points - 1);
  for (std::size_t round = 0; round < config.refine_iters; ++round) {
    const double fine = spacing / 10.0;
    std::vector<GridPoint> local;
    local.reserve(21);
    for (int k = -10; k <= 10; ++k) {
      const double x = k == 0 ? incumbent.position : incumbent.position + k * fine;
      if (x < stats.min || x > stats.max) continue;
      local.push_back({x, k == 0 ? incumbent.density : kde(x)});
    }
    incumbent = argmax(local);
    result.evaluated.insert(result.evaluated.end(), local.begin(), local.end());
    spacing = fine;
  }
  result.mode = incumbent.position;
  return result;
}

DistributionStats compute_stats(Axis axis, std::span<const double> scores, const KdeConfig& config) {
  const auto s = axis_stats(scores);
  auto mode = find_mode(scores, config);
  DistributionStats out;
  out.axis = axis;
  out.mu_data = s.mu;
  out.sigma_data = s.sigma;
  out.x_min = s.min;
  out.x_max = s.max;
  out.kde_bandwidth = mode.bandwidth;
  out.kde_grid = std::move(mode.grid);
  out.mu_peak_kde = mode.mode;
  return out;
}

}  // namespace dose
