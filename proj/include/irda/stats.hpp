#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <set>
#include <utility>
#include <vector>

namespace irda::stats {

/// items x raters, binary labels.
using LabelMatrix = std::vector<std::vector<int>>;

/// Fleiss' kappa over two categories. When expected agreement is 1 (every
/// label identical) the result is 1.
double fleiss_kappa(const LabelMatrix& m);

/// Mean of two-rater Fleiss' kappa over all rater pairs.
double mean_pairwise_kappa(const LabelMatrix& m);

/// |a ∩ b| / |a ∪ b|; two empty sets give 1.
double jaccard(const std::set<int>& a, const std::set<int>& b);
double mean_pairwise_jaccard(const std::vector<std::set<int>>& sets);
std::vector<double> pairwise_jaccard(const std::vector<std::set<int>>& sets);

double mean(const std::vector<double>& values);

struct Interval {
  double low = 0.0;
  double high = 0.0;
  double mean = 0.0;
};

inline constexpr int kDefaultResamples = 10000;

/// Percentile bootstrap interval for the mean (linear interpolation between
/// order statistics).
Interval bootstrap_ci(const std::vector<double>& values, int resamples = kDefaultResamples, double level = 0.95,
                      std::uint64_t seed = 0);

struct WilcoxonResult {
  double statistic = 0.0; // min(W+, W-)
  double w_plus = 0.0;
  double w_minus = 0.0;
  double p_two_sided = 1.0;
  int n = 0; // nonzero differences
  bool exact = false;
};

inline constexpr int kExactWilcoxonMax = 12;

enum class WilcoxonMethod { Auto, Exact, Normal };

/// Signed-rank test on x - y. Zero differences are dropped, ties get
/// midranks. Throws ValidationError("no signal") when every difference is 0.
WilcoxonResult wilcoxon_signed_rank(const std::vector<std::pair<double, double>>& pairs,
                                    WilcoxonMethod method = WilcoxonMethod::Auto);
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& differences,
                                    WilcoxonMethod method = WilcoxonMethod::Auto);

struct PairedSummary {
  std::vector<double> deltas; // a - b
  Interval delta_ci;
  WilcoxonResult wilcoxon;
  bool has_signal = true;
};

PairedSummary paired_summary(const std::vector<double>& a, const std::vector<double>& b,
                             int resamples = kDefaultResamples, std::uint64_t seed = 0);

nlohmann::json to_json(const Interval& i);
nlohmann::json to_json(const WilcoxonResult& w);
nlohmann::json to_json(const PairedSummary& s);

} // namespace irda::stats
