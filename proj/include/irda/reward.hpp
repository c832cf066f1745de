#pragma once

#include "irda/common.hpp"
#include "irda/llm.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace irda::loop {
class Session;
}

namespace irda::reward {

enum class Variant { IRDA, Baseline };

std::string_view to_string(Variant v);

struct RewardModelContext {
  std::string env_desc;
  llm::Conversation conversation;
  std::vector<llm::FeedbackItem> feedback;
  LabelPair labels;
  Variant variant = Variant::IRDA;
};

/// R = 1 iff p_aligned > p_misaligned; an exact tie is 0.
int reward(const llm::LabelProbabilities& p);
int reward(const RewardModelContext& ctx, const std::string& encoded, llm::Backend& backend);

/// Full conversation and D_fb of a session.
RewardModelContext build_irda_context(const loop::Session& s);

/// Same examples without the reflective exchange: hypothesis and response
/// turns are dropped, each item keeps only its first critique, and sentences
/// citing features first raised after the first hypothesis are removed.
RewardModelContext build_baseline_context(const loop::Session& s);

enum class Metric { Accuracy, BalancedAccuracy };

std::string_view to_string(Metric m);
Metric metric_from_string(std::string_view name);

struct Confusion {
  int tp = 0;
  int fp = 0;
  int tn = 0;
  int fn = 0;

  int total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

Confusion confusion(const std::vector<int>& predictions, const std::vector<int>& truth);

/// Balanced accuracy = (TPR + TNR) / 2. With one class present it is that
/// class's recall and `single_class` is set.
double metric_value(const Confusion& c, Metric m, bool* single_class = nullptr);

struct LabeledItem {
  std::string id;
  std::string encoded;
  int label = 0;
};

struct Evaluation {
  Metric metric = Metric::Accuracy;
  double value = 0.0;
  bool single_class = false;
  Confusion confusion;
  std::vector<std::string> ids;
  std::vector<int> predictions;
  std::vector<int> truth;
  std::vector<double> p_aligned;
};

Evaluation evaluate(const RewardModelContext& ctx, const std::vector<LabeledItem>& test_set, Metric metric,
                    llm::Backend& backend);

nlohmann::json to_json(const Evaluation& e);
/// Per-item predictions as CSV: id,truth,prediction,p_aligned.
std::string predictions_csv(const Evaluation& e);

} // namespace irda::reward
