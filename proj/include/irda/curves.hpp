#pragma once

#include "irda/common.hpp"
#include "irda/mlp.hpp"
#include "irda/oracle.hpp"
#include "irda/reward.hpp"
#include "irda/stats.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <string>
#include <vector>

// Accuracy-vs-samples curves for individual and collective MLPs.
namespace irda::curves {

enum class Variant { Individual, Collective };

std::string_view to_string(Variant v);

struct CurveOptions {
  int max_samples = 30;
  int test_size = 50;
  /// Sample counts to evaluate; empty = 1..max_samples.
  std::vector<int> counts;
  reward::Metric metric = reward::Metric::BalancedAccuracy;
  mlp::TrainOptions train;
  int bootstrap_resamples = stats::kDefaultResamples;
};

struct TrainingCurve {
  Variant variant = Variant::Individual;
  std::vector<int> sample_counts;
  /// user id -> metric per sample count
  std::map<std::string, std::vector<double>> metric_by_count;
  /// Bootstrap band of the mean over users, per sample count.
  std::vector<stats::Interval> bands;
};

struct CurvePair {
  TrainingCurve individual;
  TrainingCurve collective;
};

/// The first `test_size` pool items form every user's held-out set; the next
/// `max_samples` are labeled by every user, in order. Throws ConfigError when
/// the pool is smaller than max_samples + test_size.
CurvePair build_curves(const std::vector<oracle::UserModel>& population, const std::vector<Stimulus>& pool,
                       std::uint64_t seed, const CurveOptions& options = {});

nlohmann::json to_json(const TrainingCurve& c);
/// count,mean,ci_low,ci_high,variant
std::string to_csv(const CurvePair& p);

} // namespace irda::curves
