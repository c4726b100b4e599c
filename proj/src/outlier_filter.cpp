#include "dose/outlier_filter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "dose/errors.hpp"
#include "dose/parallel.hpp"

namespace dose {
namespace {

// Mean and population sd computed over sorted values so the result does not
// depend on record order.
std::pair<double, double> sorted_moments(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  const double mu = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return {mu, std::sqrt(ss / n)};
}

double dist2(const Point2& a, const Point2& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

// Calls visit(j) for every j with |p_i - p_j| <= eps, including i itself.
class NeighborIndex {
 public:
  NeighborIndex(const std::vector<Point2>& pts, double eps, bool use_grid)
      : pts_(pts), eps_(eps), eps2_(eps * eps), use_grid_(use_grid) {
    if (!use_grid_) return;
    for (std::size_t i = 0; i < pts_.size(); ++i) cells_[cell_key(cell_of(pts_[i].x), cell_of(pts_[i].y))].push_back(i);
  }

  template <typename Visit>
  void for_each_neighbor(std::size_t i, Visit&& visit) const {
    const Point2& p = pts_[i];
    if (!use_grid_) {
      for (std::size_t j = 0; j < pts_.size(); ++j) {
        if (dist2(p, pts_[j]) <= eps2_) visit(j);
      }
      return;
    }
    const std::int64_t cx = cell_of(p.x);
    const std::int64_t cy = cell_of(p.y);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        const auto it = cells_.find(cell_key(cx + dx, cy + dy));
        if (it == cells_.end()) continue;
        for (std::size_t j : it->second) {
          if (dist2(p, pts_[j]) <= eps2_) visit(j);
        }
      }
    }
  }

 private:
  std::int64_t cell_of(double v) const {
    constexpr double kLimit = 0x1.0p30;
    return static_cast<std::int64_t>(std::clamp(std::floor(v / eps_), -kLimit, kLimit));
  }
  static std::uint64_t cell_key(std::int64_t cx, std::int64_t cy) {
    return (static_cast<std::uint64_t>(cx) << 32) ^ (static_cast<std::uint64_t>(cy) & 0xffffffffULL);
  }

  const std::vector<Point2>& pts_;
  double eps_;
  double eps2_;
  bool use_grid_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

// Exact nearest-neighbour distances by sweeping outward in x-sorted order.
std::vector<double> nearest_neighbor_distances(const std::vector<Point2>& pts) {
  const std::size_t n = pts.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pts[a].x != pts[b].x ? pts[a].x < pts[b].x : pts[a].y < pts[b].y;
  });
  std::vector<double> nn(n, std::numeric_limits<double>::infinity());
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const Point2& p = pts[order[r]];
      double best2 = std::numeric_limits<double>::infinity();
      for (std::size_t s = r + 1; s < n; ++s) {
        const double gap = pts[order[s]].x - p.x;
        if (gap * gap > best2) break;
        best2 = std::min(best2, dist2(p, pts[order[s]]));
      }
      for (std::size_t s = r; s-- > 0;) {
        const double gap = p.x - pts[order[s]].x;
        if (gap * gap > best2) break;
        best2 = std::min(best2, dist2(p, pts[order[s]]));
      }
      nn[order[r]] = std::sqrt(best2);
    }
  }, 256);
  return nn;
}

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace

void DbscanParams::validate() const {
  if (eps && !(*eps > 0.0)) throw ConfigError("DBSCAN eps must be > 0");
  if (min_pts < 1) throw ConfigError("DBSCAN min_pts must be >= 1");
}

std::vector<Point2> standardize(const Dataset& data) {
  const auto xs = data.scores(Axis::Text);
  const auto ys = data.scores(Axis::Clip);
  const auto [mx, sx] = sorted_moments(xs);
  const auto [my, sy] = sorted_moments(ys);
  std::vector<Point2> pts(data.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    pts[i].x = sx > 0.0 ? (xs[i] - mx) / sx : 0.0;
    pts[i].y = sy > 0.0 ? (ys[i] - my) / sy : 0.0;
  }
  return pts;
}

double auto_eps(const Dataset& data) {
  if (data.size() < 2) throw DegenerateData("auto eps needs at least 2 points");
  const auto pts = standardize(data);
  const auto nn = nearest_neighbor_distances(pts);
  double med = median(nn);
  if (med == 0.0) {
    // Heavy duplication: fall back to the median over non-coincident pairs.
    std::vector<double> positive;
    std::copy_if(nn.begin(), nn.end(), std::back_inserter(positive), [](double d) { return d > 0.0; });
    if (positive.empty()) throw DegenerateData("all points identical; auto eps undefined");
    med = median(std::move(positive));
  }
  return 3.0 * med;
}

std::vector<bool> dbscan_noise(const std::vector<Point2>& points, double eps, std::size_t min_pts,
                               NeighborSearch search) {
  const std::size_t n = points.size();
  const bool use_grid = search == NeighborSearch::Grid ||
                        (search == NeighborSearch::Auto && n > kBruteForceLimit);
  const NeighborIndex index(points, eps, use_grid);

  std::vector<char> core(n, 0);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      std::size_t count = 0;
      index.for_each_neighbor(i, [&](std::size_t) { ++count; });
      core[i] = count >= min_pts ? 1 : 0;
    }
  }, 64);

  std::vector<char> noise(n, 0);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      if (core[i]) continue;
      bool reachable = false;
      index.for_each_neighbor(i, [&](std::size_t j) { reachable = reachable || core[j]; });
      noise[i] = reachable ? 0 : 1;
    }
  }, 64);
  return {noise.begin(), noise.end()};
}

std::pair<Dataset, OutlierReport> filter_outliers(const Dataset& data, const DbscanParams& params) {
  params.validate();
  OutlierReport report;
  report.input_count = data.size();
  report.min_pts = params.min_pts;
  report.eps_auto = !params.eps.has_value();
  if (data.empty()) return {data, report};

  double eps = 0.0;
  if (params.eps) {
    eps = *params.eps;
  } else {
    try {
      eps = auto_eps(data);
    } catch (const DegenerateData&) {
      report.degenerate = true;
      return {data, report};
    }
  }
  report.eps = eps;

  const auto noise = dbscan_noise(standardize(data), eps, params.min_pts);
  const auto flagged = static_cast<std::size_t>(std::count(noise.begin(), noise.end(), true));
  if (2 * flagged > data.size()) {
    std::cerr << "warning: DBSCAN flagged " << flagged << " of " << data.size()
              << " points as noise (> 50%); outlier filter skipped\n";
    report.guard_triggered = true;
    return {data, report};
  }

  std::vector<bool> keep(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    keep[i] = !noise[i];
    if (noise[i]) report.removed_ids.push_back(data[i].id);
  }
  std::sort(report.removed_ids.begin(), report.removed_ids.end());
  report.removed_count = flagged;
  report.removed_fraction = static_cast<double>(flagged) / static_cast<double>(data.size());
  return {data.subset(keep), report};
}

}  // namespace dose
