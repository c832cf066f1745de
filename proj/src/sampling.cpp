#include "irda/sampling.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <set>

namespace irda::sampling {

namespace {

std::vector<int> assign(const std::vector<Point>& points, const std::vector<Point>& centroids) {
  std::vector<int> out(points.size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < centroids.size(); ++j) {
      const double d = squared_distance(points[i], centroids[j]);
      if (d < best) {
        best = d;
        out[i] = static_cast<int>(j);
      }
    }
  }
  return out;
}

std::vector<Point> means(const std::vector<Point>& points, const std::vector<int>& assignments, int k,
                         std::vector<int>& sizes) {
  const std::size_t d = points.front().size();
  std::vector<Point> out(static_cast<std::size_t>(k), Point(d, 0.0));
  sizes.assign(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto c = static_cast<std::size_t>(assignments[i]);
    sizes[c] += 1;
    for (std::size_t j = 0; j < d; ++j) {
      out[c][j] += points[i][j];
    }
  }
  for (std::size_t c = 0; c < out.size(); ++c) {
    if (sizes[c] > 0) {
      for (double& x : out[c]) {
        x /= sizes[c];
      }
    }
  }
  return out;
}

// Recompute centroids; an empty cluster takes over the point farthest from
// its current centroid (drawn from a cluster that can spare one).
std::vector<Point> update(const std::vector<Point>& points, std::vector<int>& assignments, int k) {
  std::vector<int> sizes;
  auto centroids = means(points, assignments, k, sizes);
  for (int c = 0; c < k; ++c) {
    if (sizes[static_cast<std::size_t>(c)] > 0) {
      continue;
    }
    std::size_t far = points.size();
    double far_d = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto owner = static_cast<std::size_t>(assignments[i]);
      if (sizes[owner] < 2) {
        continue;
      }
      const double d = squared_distance(points[i], centroids[owner]);
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far == points.size()) {
      throw ConfigError("k-means could not repair an empty cluster");
    }
    assignments[far] = c;
    centroids = means(points, assignments, k, sizes);
  }
  return centroids;
}

std::vector<Point> kmeanspp(const std::vector<Point>& points, int k, std::mt19937_64& rng) {
  std::vector<Point> centers;
  centers.push_back(points[std::uniform_int_distribution<std::size_t>(0, points.size() - 1)(rng)]);
  std::vector<double> d2(points.size());
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) {
        best = std::min(best, squared_distance(points[i], c));
      }
      d2[i] = best;
      total += best;
    }
    double r = std::uniform_real_distribution<double>(0.0, total)(rng);
    std::size_t chosen = points.size();
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (d2[i] <= 0.0) {
        continue;
      }
      chosen = i;
      r -= d2[i];
      if (r < 0.0) {
        break;
      }
    }
    centers.push_back(points[chosen]);
  }
  return centers;
}

} // namespace

double squared_distance(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double inertia_of(const std::vector<Point>& points, const std::vector<int>& assignments,
                  const std::vector<Point>& centroids) {
  double s = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    s += squared_distance(points[i], centroids[static_cast<std::size_t>(assignments[i])]);
  }
  return s;
}

Clustering kmeans(const std::vector<Point>& points, int k, std::uint64_t seed) {
  if (k < 1) {
    throw ConfigError("k must be at least 1");
  }
  if (points.empty()) {
    throw ConfigError("k-means needs at least one point");
  }
  for (const auto& p : points) {
    if (p.size() != points.front().size()) {
      throw ValidationError("points differ in dimension");
    }
  }
  const std::set<Point> distinct(points.begin(), points.end());
  if (static_cast<std::size_t>(k) > distinct.size()) {
    throw ConfigError("k = " + std::to_string(k) + " exceeds the " + std::to_string(distinct.size()) +
                      " distinct points");
  }

  std::mt19937_64 rng(mix_seed(seed, 0x6b6d));
  Clustering c;
  c.k = k;
  c.centroids = kmeanspp(points, k, rng);
  c.assignments = assign(points, c.centroids);
  bool converged = false;
  while (c.iterations < kMaxLloydIterations) {
    c.centroids = update(points, c.assignments, k);
    c.inertia_history.push_back(inertia_of(points, c.assignments, c.centroids));
    ++c.iterations;
    auto next = assign(points, c.centroids);
    if (next == c.assignments) {
      converged = true;
      break;
    }
    c.assignments = std::move(next);
  }
  if (!converged) {
    c.centroids = update(points, c.assignments, k);
  }
  c.inertia = inertia_of(points, c.assignments, c.centroids);
  return c;
}

std::vector<std::size_t> select_representatives(const Clustering& c, const std::vector<Point>& points,
                                                const std::vector<std::string>& ids) {
  if (points.size() != c.assignments.size() || ids.size() != points.size()) {
    throw ValidationError("clustering, points and ids differ in length");
  }
  std::vector<std::size_t> out(static_cast<std::size_t>(c.k), points.size());
  std::vector<double> best(static_cast<std::size_t>(c.k), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto cl = static_cast<std::size_t>(c.assignments[i]);
    const double d = squared_distance(points[i], c.centroids[cl]);
    if (d < best[cl] || (d == best[cl] && ids[i] < ids[out[cl]])) {
      best[cl] = d;
      out[cl] = i;
    }
  }
  return out;
}

nlohmann::json to_json(const Clustering& c, const std::vector<std::string>& ids) {
  nlohmann::json assignments = nlohmann::json::object();
  for (std::size_t i = 0; i < c.assignments.size() && i < ids.size(); ++i) {
    assignments[ids[i]] = c.assignments[i];
  }
  return nlohmann::json{{"k", c.k},
                        {"centroids", c.centroids},
                        {"assignments", assignments},
                        {"inertia", c.inertia},
                        {"inertia_history", c.inertia_history},
                        {"iterations", c.iterations}};
}

} // namespace irda::sampling
