#pragma once

#include "irda/common.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace irda::sampling {

using Point = std::vector<double>;

struct Clustering {
  int k = 0;
  std::vector<int> assignments; // point index -> cluster
  std::vector<Point> centroids;
  double inertia = 0.0;
  /// Inertia after each Lloyd iteration; non-increasing.
  std::vector<double> inertia_history;
  int iterations = 0;
};

inline constexpr int kMaxLloydIterations = 100;

double squared_distance(const Point& a, const Point& b);
double inertia_of(const std::vector<Point>& points, const std::vector<int>& assignments,
                  const std::vector<Point>& centroids);

/// k-means++ seeding followed by Lloyd iterations until the assignment is a
/// fixpoint or 100 iterations pass. Throws ConfigError when k < 1 or k exceeds
/// the number of distinct points.
Clustering kmeans(const std::vector<Point>& points, int k, std::uint64_t seed);

/// Index of the member closest to each centroid; ties go to the
/// lexicographically smallest id.
std::vector<std::size_t> select_representatives(const Clustering& c, const std::vector<Point>& points,
                                                const std::vector<std::string>& ids);

nlohmann::json to_json(const Clustering& c, const std::vector<std::string>& ids);

} // namespace irda::sampling
