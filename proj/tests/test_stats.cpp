#include "irda/common.hpp"
#include "irda/stats.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <random>

using namespace irda;
using namespace irda::stats;

namespace {

// Fleiss' kappa straight from the textbook definition.
double textbook_kappa(const LabelMatrix& m) {
  const double n_items = static_cast<double>(m.size());
  const double raters = static_cast<double>(m.front().size());
  double p_bar = 0.0;
  double p1 = 0.0;
  for (const auto& row : m) {
    double ones = 0.0;
    for (int v : row) {
      ones += v;
    }
    const double zeros = raters - ones;
    p_bar += (ones * ones + zeros * zeros - raters) / (raters * (raters - 1));
    p1 += ones;
  }
  p_bar /= n_items;
  p1 /= n_items * raters;
  const double pe = p1 * p1 + (1 - p1) * (1 - p1);
  return (p_bar - pe) / (1 - pe);
}

LabelMatrix random_matrix(std::mt19937_64& rng, int items, int raters) {
  std::bernoulli_distribution coin(0.35);
  LabelMatrix m(static_cast<std::size_t>(items), std::vector<int>(static_cast<std::size_t>(raters)));
  for (auto& row : m) {
    for (auto& v : row) {
      v = coin(rng);
    }
  }
  return m;
}

} // namespace

TEST(FleissKappa, PerfectAgreement) {
  EXPECT_DOUBLE_EQ(fleiss_kappa({{1, 1, 1}, {0, 0, 0}, {1, 1, 1}}), 1.0);
  EXPECT_DOUBLE_EQ(fleiss_kappa({{1, 1}, {1, 1}}), 1.0);
}

TEST(FleissKappa, HandComputedSplit) {
  EXPECT_NEAR(fleiss_kappa({{1, 1}, {1, 0}}), -1.0 / 3.0, 1e-12);
}

TEST(FleissKappa, MatchesTextbookFormula) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = random_matrix(rng, 5 + trial % 40, 2 + trial % 9);
    const double pe_check = textbook_kappa(m);
    if (std::isfinite(pe_check)) {
      EXPECT_NEAR(fleiss_kappa(m), pe_check, 1e-9);
    }
  }
}

TEST(FleissKappa, InvariantToItemAndRaterPermutation) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    auto m = random_matrix(rng, 20, 6);
    const double k = fleiss_kappa(m);
    std::shuffle(m.begin(), m.end(), rng);
    std::vector<std::size_t> order{0, 1, 2, 3, 4, 5};
    std::shuffle(order.begin(), order.end(), rng);
    LabelMatrix p = m;
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (std::size_t r = 0; r < order.size(); ++r) {
        p[i][r] = m[i][order[r]];
      }
    }
    EXPECT_NEAR(fleiss_kappa(p), k, 1e-12);
  }
}

TEST(FleissKappa, NeedsTwoRatersAndAnItem) {
  EXPECT_THROW(fleiss_kappa({{1}, {0}}), ValidationError);
  EXPECT_THROW(fleiss_kappa({}), ValidationError);
  EXPECT_THROW(fleiss_kappa({{1, 0}, {1}}), ValidationError);
}

TEST(FleissKappa, PairwiseMeanOverRaterPairs) {
  const LabelMatrix m{{1, 1, 0}, {0, 1, 0}, {1, 1, 1}, {0, 0, 1}};
  double total = 0.0;
  int pairs = 0;
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = a + 1; b < 3; ++b) {
      LabelMatrix two;
      for (const auto& row : m) {
        two.push_back({row[a], row[b]});
      }
      total += textbook_kappa(two);
      ++pairs;
    }
  }
  EXPECT_NEAR(mean_pairwise_kappa(m), total / pairs, 1e-12);
}

TEST(Jaccard, Examples) {
  EXPECT_DOUBLE_EQ(jaccard({1, 2}, {2, 3}), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(jaccard({1, 2}, {1, 2}), 1.0);
  EXPECT_DOUBLE_EQ(jaccard({1}, {2}), 0.0);
  EXPECT_DOUBLE_EQ(jaccard({}, {}), 1.0);
  // {1,2} {2,3} {1,2,3}: 1/3, 2/3, 2/3.
  EXPECT_NEAR(mean_pairwise_jaccard({{1, 2}, {2, 3}, {1, 2, 3}}), (1.0 / 3 + 2.0 / 3 + 2.0 / 3) / 3, 1e-12);
  EXPECT_EQ(pairwise_jaccard({{1, 2}, {2, 3}, {1, 2, 3}}).size(), 3u);
  EXPECT_THROW(mean_pairwise_jaccard({{1}}), ValidationError);
}

TEST(Jaccard, SymmetricBoundedAndOneIffEqual) {
  std::mt19937_64 rng(13);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 300; ++trial) {
    std::set<int> a;
    std::set<int> b;
    for (int i = 0; i < 6; ++i) {
      if (coin(rng)) a.insert(i);
      if (coin(rng)) b.insert(i);
    }
    const double j = jaccard(a, b);
    EXPECT_EQ(j, jaccard(b, a));
    EXPECT_GE(j, 0.0);
    EXPECT_LE(j, 1.0);
    EXPECT_EQ(j == 1.0, a == b);
  }
}

TEST(Bootstrap, DegenerateSample) {
  const auto ci = bootstrap_ci(std::vector<double>(15, 0.7), 1000, 0.95, 1);
  EXPECT_DOUBLE_EQ(ci.low, 0.7);
  EXPECT_DOUBLE_EQ(ci.high, 0.7);
  EXPECT_DOUBLE_EQ(ci.mean, 0.7);
}

TEST(Bootstrap, ContainsSampleMeanAndIsDeterministic) {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> g(2.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(30);
    for (auto& x : v) {
      x = g(rng);
    }
    const auto a = bootstrap_ci(v, 2000, 0.95, static_cast<std::uint64_t>(trial));
    const auto b = bootstrap_ci(v, 2000, 0.95, static_cast<std::uint64_t>(trial));
    EXPECT_LE(a.low, mean(v));
    EXPECT_GE(a.high, mean(v));
    EXPECT_NEAR(a.mean, mean(v), 1e-12);
    EXPECT_EQ(a.low, b.low);
    EXPECT_EQ(a.high, b.high);
  }
  EXPECT_THROW(bootstrap_ci({}), ValidationError);
}

TEST(Bootstrap, CoverageOfNominalNinetyFive) {
  std::mt19937_64 rng(15);
  std::normal_distribution<double> g(0.0, 1.0);
  int covered = 0;
  const int trials = 500;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> v(100);
    for (auto& x : v) {
      x = g(rng);
    }
    const auto ci = bootstrap_ci(v, 2000, 0.95, static_cast<std::uint64_t>(t));
    covered += ci.low <= 0.0 && 0.0 <= ci.high;
  }
  const double rate = static_cast<double>(covered) / trials;
  EXPECT_GE(rate, 0.92);
  EXPECT_LE(rate, 0.98);
}

TEST(Wilcoxon, AllPositiveThree) {
  const auto w = wilcoxon_signed_rank(std::vector<double>{1, 2, 3});
  EXPECT_TRUE(w.exact);
  EXPECT_DOUBLE_EQ(w.w_minus, 0.0);
  EXPECT_DOUBLE_EQ(w.w_plus, 6.0);
  EXPECT_DOUBLE_EQ(w.p_two_sided, 0.25);
}

TEST(Wilcoxon, Antisymmetric) {
  EXPECT_DOUBLE_EQ(wilcoxon_signed_rank(std::vector<double>{1, -1}).p_two_sided, 1.0);
}

TEST(Wilcoxon, PairsAndZeroDrop) {
  const auto w = wilcoxon_signed_rank(std::vector<std::pair<double, double>>{{3, 2}, {5, 3}, {4, 4}, {9, 6}});
  EXPECT_EQ(w.n, 3);
  EXPECT_DOUBLE_EQ(w.p_two_sided, 0.25);
  EXPECT_THROW(wilcoxon_signed_rank(std::vector<double>{0, 0, 0}), ValidationError);
}

TEST(Wilcoxon, ExactAgreesWithEnumeration) {
  // Brute force over all 2^n sign flips of the observed |d| ranks.
  std::mt19937_64 rng(16);
  std::uniform_int_distribution<int> val(-6, 6);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<double> d;
    while (d.size() < 8) {
      const int v = val(rng);
      if (v != 0) d.push_back(v);
    }
    const auto w = wilcoxon_signed_rank(d, WilcoxonMethod::Exact);
    std::vector<double> absd;
    for (double x : d) absd.push_back(std::abs(x));
    std::vector<double> ranks(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      double less = 0, equal = 0;
      for (double y : absd) {
        less += y < absd[i];
        equal += y == absd[i];
      }
      ranks[i] = less + (equal + 1) / 2;
    }
    const double total = std::accumulate(ranks.begin(), ranks.end(), 0.0);
    const double observed = w.statistic;
    int extreme = 0;
    const int n = static_cast<int>(d.size());
    for (int mask = 0; mask < (1 << n); ++mask) {
      double plus = 0;
      for (int i = 0; i < n; ++i) {
        if (mask & (1 << i)) plus += ranks[static_cast<std::size_t>(i)];
      }
      extreme += std::min(plus, total - plus) <= observed + 1e-9;
    }
    EXPECT_NEAR(w.p_two_sided, std::min(1.0, static_cast<double>(extreme) / (1 << n)), 1e-12);
  }
}

TEST(Wilcoxon, ExactAndNormalAgreeAtBoundary) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.3, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> d(12);
    for (auto& x : d) x = g(rng);
    const auto exact = wilcoxon_signed_rank(d, WilcoxonMethod::Exact);
    const auto normal = wilcoxon_signed_rank(d, WilcoxonMethod::Normal);
    EXPECT_NEAR(exact.p_two_sided, normal.p_two_sided, 0.02) << "trial " << trial;
    EXPECT_EQ(wilcoxon_signed_rank(d).exact, true);
  }
  std::vector<double> big(30);
  for (auto& x : big) x = g(rng);
  EXPECT_FALSE(wilcoxon_signed_rank(big).exact);
}

TEST(Wilcoxon, ScaleInvariant) {
  std::mt19937_64 rng(18);
  std::normal_distribution<double> g(0.2, 1.0);
  for (int n : {6, 20}) {
    std::vector<double> d(static_cast<std::size_t>(n));
    for (auto& x : d) x = g(rng);
    auto scaled = d;
    for (auto& x : scaled) x *= 37.5;
    EXPECT_DOUBLE_EQ(wilcoxon_signed_rank(d).p_two_sided, wilcoxon_signed_rank(scaled).p_two_sided);
  }
}

TEST(PairedSummary, DeltasCiAndSignal) {
  const auto s = paired_summary({0.9, 0.8, 0.7}, {0.5, 0.6, 0.7}, 1000, 3);
  ASSERT_EQ(s.deltas.size(), 3u);
  EXPECT_NEAR(s.deltas[0], 0.4, 1e-12);
  EXPECT_TRUE(s.has_signal);
  EXPECT_EQ(s.wilcoxon.n, 2);
  const auto j = to_json(s);
  EXPECT_TRUE(j.contains("wilcoxon_p"));
  const auto flat = paired_summary({0.5, 0.5}, {0.5, 0.5}, 100, 3);
  EXPECT_FALSE(flat.has_signal);
}
