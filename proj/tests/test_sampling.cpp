#include "irda/common.hpp"
#include "irda/sampling.hpp"

#include <gtest/gtest.h>

#include <limits>
#include <random>

using namespace irda;
using namespace irda::sampling;

namespace {

std::vector<Point> random_points(std::uint64_t seed, int n, int dim) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Point> out(static_cast<std::size_t>(n), Point(static_cast<std::size_t>(dim)));
  for (auto& p : out) {
    for (auto& x : p) {
      x = u(rng);
    }
  }
  return out;
}

// Inertia of an assignment with centroids recomputed as member means.
double assignment_cost(const std::vector<Point>& pts, const std::vector<int>& assign, int k) {
  const std::size_t dim = pts.front().size();
  std::vector<Point> sums(static_cast<std::size_t>(k), Point(dim, 0.0));
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto c = static_cast<std::size_t>(assign[i]);
    ++counts[c];
    for (std::size_t d = 0; d < dim; ++d) {
      sums[c][d] += pts[i][d];
    }
  }
  double cost = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto c = static_cast<std::size_t>(assign[i]);
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = pts[i][d] - sums[c][d] / counts[c];
      cost += diff * diff;
    }
  }
  return cost;
}

std::vector<std::string> ids_for(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back("p" + std::to_string(1000 + i));
  }
  return ids;
}

} // namespace

TEST(KMeans, WellSeparatedPairs) {
  const std::vector<Point> pts{{0, 0}, {0, 1}, {10, 10}, {10, 11}};
  const auto c = kmeans(pts, 2, 1);
  EXPECT_EQ(c.assignments[0], c.assignments[1]);
  EXPECT_EQ(c.assignments[2], c.assignments[3]);
  EXPECT_NE(c.assignments[0], c.assignments[2]);
  const auto& low = c.centroids[static_cast<std::size_t>(c.assignments[0])];
  const auto& high = c.centroids[static_cast<std::size_t>(c.assignments[2])];
  EXPECT_DOUBLE_EQ(low[0], 0.0);
  EXPECT_DOUBLE_EQ(low[1], 0.5);
  EXPECT_DOUBLE_EQ(high[0], 10.0);
  EXPECT_DOUBLE_EQ(high[1], 10.5);
  EXPECT_DOUBLE_EQ(c.inertia, 1.0);
}

TEST(KMeans, SingleClusterIsTheMean) {
  const auto pts = random_points(3, 25, 4);
  const auto c = kmeans(pts, 1, 9);
  for (std::size_t d = 0; d < 4; ++d) {
    double mean = 0.0;
    for (const auto& p : pts) {
      mean += p[d];
    }
    EXPECT_NEAR(c.centroids[0][d], mean / 25.0, 1e-12);
  }
}

TEST(KMeans, BeatsRandomAssignments) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 6; ++trial) {
    const int k = 2 + trial % 2;
    const auto pts = random_points(100 + static_cast<std::uint64_t>(trial), 40, 3);
    const auto c = kmeans(pts, k, static_cast<std::uint64_t>(trial));
    std::uniform_int_distribution<int> pick(0, k - 1);
    for (int r = 0; r < 1000; ++r) {
      std::vector<int> assign(pts.size());
      std::vector<int> used(static_cast<std::size_t>(k), 0);
      for (auto& a : assign) {
        a = pick(rng);
        used[static_cast<std::size_t>(a)] = 1;
      }
      if (std::find(used.begin(), used.end(), 0) != used.end()) {
        continue;
      }
      EXPECT_LE(c.inertia, assignment_cost(pts, assign, k) + 1e-9);
    }
  }
}

TEST(KMeans, InvariantsAndLloydMonotonicity) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto pts = random_points(seed, 60, 5);
    const int k = 2 + static_cast<int>(seed % 5);
    const auto c = kmeans(pts, k, seed);
    ASSERT_EQ(c.assignments.size(), pts.size());
    EXPECT_LE(c.iterations, kMaxLloydIterations);
    for (std::size_t i = 1; i < c.inertia_history.size(); ++i) {
      EXPECT_LE(c.inertia_history[i], c.inertia_history[i - 1] + 1e-12);
    }
    EXPECT_NEAR(c.inertia, assignment_cost(pts, c.assignments, k), 1e-9);
    EXPECT_NEAR(c.inertia, inertia_of(pts, c.assignments, c.centroids), 1e-9);
    for (int cl = 0; cl < k; ++cl) {
      EXPECT_NE(std::find(c.assignments.begin(), c.assignments.end(), cl), c.assignments.end());
    }
  }
}

TEST(KMeans, DeterministicForSeed) {
  const auto pts = random_points(5, 50, 3);
  const auto a = kmeans(pts, 4, 12);
  const auto b = kmeans(pts, 4, 12);
  EXPECT_EQ(a.assignments, b.assignments);
  EXPECT_EQ(a.centroids, b.centroids);
  EXPECT_EQ(a.inertia, b.inertia);
}

TEST(KMeans, TooManyClustersIsConfigError) {
  const std::vector<Point> pts{{1, 1}, {1, 1}, {2, 2}};
  EXPECT_THROW(kmeans(pts, 3, 0), ConfigError);
  EXPECT_THROW(kmeans(pts, 0, 0), ConfigError);
  EXPECT_NO_THROW(kmeans(pts, 2, 0));
}

TEST(Representatives, TieGoesToSmallestId) {
  Clustering c;
  c.k = 1;
  c.assignments = {0, 0};
  c.centroids = {{0, 1}};
  const std::vector<Point> pts{{0, 2}, {0, 0}};
  const auto reps = select_representatives(c, pts, {"b", "a"});
  ASSERT_EQ(reps.size(), 1u);
  EXPECT_EQ(reps[0], 1u);
}

TEST(Representatives, SingletonClusterIsItsMember) {
  const std::vector<Point> pts{{0, 0}, {0, 1}, {50, 50}};
  const auto c = kmeans(pts, 2, 4);
  const auto reps = select_representatives(c, pts, {"x", "y", "z"});
  const auto far = static_cast<std::size_t>(c.assignments[2]);
  EXPECT_EQ(reps[far], 2u);
}

TEST(Representatives, ClosestMemberByExhaustiveScan) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto pts = random_points(seed + 40, 45, 4);
    const auto ids = ids_for(pts.size());
    const auto c = kmeans(pts, 3, seed);
    const auto reps = select_representatives(c, pts, ids);
    ASSERT_EQ(reps.size(), 3u);
    for (std::size_t cl = 0; cl < 3; ++cl) {
      EXPECT_EQ(c.assignments[reps[cl]], static_cast<int>(cl));
      const double best = squared_distance(pts[reps[cl]], c.centroids[cl]);
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (c.assignments[i] == static_cast<int>(cl)) {
          EXPECT_LE(best, squared_distance(pts[i], c.centroids[cl]));
        }
      }
    }
  }
}
