#pragma once
// Per-axis statistics, Gaussian kernel density estimate and mode search.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dose/core_model.hpp"

namespace dose {

struct KdeConfig {
  std::optional<double> bandwidth;  // nullopt = Silverman's rule
  std::size_t grid_points = 512;
  std::size_t refine_iters = 2;

  void validate() const;
};

struct AxisStats {
  double mu = 0.0;
  double sigma = 0.0;  // population standard deviation
  double min = 0.0;
  double max = 0.0;
};

AxisStats axis_stats(std::span<const double> scores);

// Standard normal density.
double std_normal_pdf(double t) noexcept;

// Direct-summation Gaussian KDE at a single point.
double kde_evaluate(std::span<const double> scores, double x, double h);

// Silverman's rule: 1.06 * sigma * N^(-1/5). Throws DegenerateData for N < 2 or sigma == 0.
double auto_bandwidth(std::span<const double> scores);

// Same value as kde_evaluate, but skips kernels that underflow to exactly zero
// by keeping the scores sorted and summing only a window around x.
class KdeEvaluator {
 public:
  KdeEvaluator(std::span<const double> scores, double h);

  [[nodiscard]] double operator()(double x) const;
  // Uniform grid of n >= 2 points over [lo, hi]; evaluated in parallel.
  [[nodiscard]] std::vector<GridPoint> grid(double lo, double hi, std::size_t n) const;
  [[nodiscard]] double bandwidth() const noexcept { return h_; }

 private:
  std::vector<double> sorted_;
  double h_;
  double norm_;
};

struct ModeResult {
  double mode = 0.0;
  double bandwidth = 0.0;        // 0 when the KDE was bypassed
  std::vector<GridPoint> grid;   // the coarse search grid
  std::vector<GridPoint> evaluated;  // every point evaluated, coarse and refined
};

// Grid argmax over [min, max] followed by refine_iters rounds of 10x finer
// local grids. Ties go to the smaller position. Constant data bypasses the KDE.
ModeResult find_mode(std::span<const double> scores, const KdeConfig& config);

// Full per-axis summary: moments, range, KDE grid and mode.
DistributionStats compute_stats(Axis axis, std::span<const double> scores, const KdeConfig& config);

}  // namespace dose
