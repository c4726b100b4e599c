#pragma once
// DBSCAN noise removal in the (text_quality, clip_score) plane.
//
// Coordinates are z-standardized per axis before any distance is taken, so
// eps is expressed in standard deviations. Only the noise label is exposed:
// a point is noise when it is not a core point and no core point lies within
// eps of it. Core points count themselves as neighbours.

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "dose/core_model.hpp"

namespace dose {

inline constexpr std::size_t kDefaultMinPts = 8;
// Above this size neighbour queries go through a uniform grid instead of all pairs.
inline constexpr std::size_t kBruteForceLimit = 50000;

struct DbscanParams {
  std::optional<double> eps;  // nullopt = auto_eps()
  std::size_t min_pts = kDefaultMinPts;

  void validate() const;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

std::vector<Point2> standardize(const Dataset& data);

// 3 x median nearest-neighbour distance in standardized space.
// Throws DegenerateData when fewer than 2 points or all points coincide.
double auto_eps(const Dataset& data);

enum class NeighborSearch { Auto, BruteForce, Grid };

// Noise flags for already-standardized points.
std::vector<bool> dbscan_noise(const std::vector<Point2>& points, double eps, std::size_t min_pts,
                               NeighborSearch search = NeighborSearch::Auto);

// Removes noise points. Never removes more than half the data: if DBSCAN
// flags more, the input is returned unchanged and report.guard_triggered is set.
std::pair<Dataset, OutlierReport> filter_outliers(const Dataset& data, const DbscanParams& params);

}  // namespace dose
