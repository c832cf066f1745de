#include "irda/reward.hpp"

#include "irda/environment.hpp"
#include "irda/phrasing.hpp"
#include "irda/session.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>

namespace irda::reward {

std::string_view to_string(Variant v) {
  return v == Variant::IRDA ? "irda" : "baseline";
}

int reward(const llm::LabelProbabilities& p) {
  return p.p_aligned > p.p_misaligned ? 1 : 0;
}

int reward(const RewardModelContext& ctx, const std::string& encoded, llm::Backend& backend) {
  return reward(backend.query_label_probs(ctx.env_desc, ctx.conversation, encoded, ctx.labels));
}

RewardModelContext build_irda_context(const loop::Session& s) {
  return RewardModelContext{env::description(s.config().env), s.conversation(), s.feedback(),
                            env::labels(s.config().env), Variant::IRDA};
}

RewardModelContext build_baseline_context(const loop::Session& s) {
  const EnvKind env = s.config().env;
  const LabelPair labels = env::labels(env);
  const auto& turns = s.conversation().turns();

  // Features the user raised before any hypothesis prompted reflection.
  std::set<int> allowed;
  for (const auto& t : turns) {
    if (t.kind == llm::TurnKind::Hypothesis) {
      break;
    }
    if (t.kind == llm::TurnKind::Feedback) {
      for (int f : phrasing::mentioned_features(env, t.text)) {
        allowed.insert(f);
      }
    }
  }
  auto strip = [&](const std::string& text, int label) {
    std::string kept;
    for (const auto& sentence : phrasing::split_sentences(text)) {
      const auto mentioned = phrasing::mentioned_features(env, sentence);
      const bool ok = std::all_of(mentioned.begin(), mentioned.end(), [&](int f) { return allowed.contains(f); });
      if (ok) {
        kept += kept.empty() ? sentence : " " + sentence;
      }
    }
    return kept.empty() ? phrasing::inarticulate(env, labels.word(label)) : kept;
  };

  RewardModelContext ctx;
  ctx.env_desc = env::description(env);
  ctx.labels = labels;
  ctx.variant = Variant::Baseline;
  std::set<std::string> seen;
  for (const auto& t : turns) {
    if (t.kind == llm::TurnKind::System) {
      ctx.conversation.append(t);
    } else if (t.kind == llm::TurnKind::Feedback && seen.insert(t.item_id).second) {
      llm::Turn copy = t;
      copy.text = strip(t.text, t.label);
      ctx.conversation.append(copy);
      ctx.feedback.push_back(llm::FeedbackItem{t.item_id, t.block, t.label, copy.text});
    }
  }
  return ctx;
}

std::string_view to_string(Metric m) {
  return m == Metric::Accuracy ? "accuracy" : "balanced_accuracy";
}

Metric metric_from_string(std::string_view name) {
  if (name == "accuracy") {
    return Metric::Accuracy;
  }
  if (name == "balanced_accuracy" || name == "balanced-accuracy") {
    return Metric::BalancedAccuracy;
  }
  throw ConfigError("unknown metric '" + std::string(name) + "' (accuracy, balanced_accuracy)");
}

Confusion confusion(const std::vector<int>& predictions, const std::vector<int>& truth) {
  if (predictions.size() != truth.size()) {
    throw ValidationError("predictions and truth differ in length");
  }
  Confusion c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predictions[i] == 1;
    const bool t = truth[i] == 1;
    (p ? (t ? c.tp : c.fp) : (t ? c.fn : c.tn)) += 1;
  }
  return c;
}

double metric_value(const Confusion& c, Metric m, bool* single_class) {
  if (c.total() == 0) {
    throw ValidationError("metric of an empty test set");
  }
  const int pos = c.tp + c.fn;
  const int neg = c.tn + c.fp;
  if (single_class != nullptr) {
    *single_class = pos == 0 || neg == 0;
  }
  if (m == Metric::Accuracy) {
    return static_cast<double>(c.tp + c.tn) / c.total();
  }
  if (pos == 0) {
    return static_cast<double>(c.tn) / neg;
  }
  if (neg == 0) {
    return static_cast<double>(c.tp) / pos;
  }
  return 0.5 * (static_cast<double>(c.tp) / pos + static_cast<double>(c.tn) / neg);
}

Evaluation evaluate(const RewardModelContext& ctx, const std::vector<LabeledItem>& test_set, Metric metric,
                    llm::Backend& backend) {
  if (test_set.empty()) {
    throw ValidationError("empty test set");
  }
  Evaluation e;
  e.metric = metric;
  for (const auto& item : test_set) {
    const auto probs = backend.query_label_probs(ctx.env_desc, ctx.conversation, item.encoded, ctx.labels);
    e.ids.push_back(item.id);
    e.truth.push_back(item.label);
    e.predictions.push_back(reward(probs));
    e.p_aligned.push_back(probs.p_aligned);
  }
  e.confusion = confusion(e.predictions, e.truth);
  e.value = metric_value(e.confusion, metric, &e.single_class);
  return e;
}

nlohmann::json to_json(const Evaluation& e) {
  nlohmann::json items = nlohmann::json::array();
  for (std::size_t i = 0; i < e.ids.size(); ++i) {
    items.push_back({{"id", e.ids[i]}, {"truth", e.truth[i]}, {"prediction", e.predictions[i]},
                     {"p_aligned", e.p_aligned[i]}});
  }
  return nlohmann::json{
      {"metric", std::string(to_string(e.metric))},
      {"value", e.value},
      {"single_class", e.single_class},
      {"confusion", {{"tp", e.confusion.tp}, {"fp", e.confusion.fp}, {"tn", e.confusion.tn}, {"fn", e.confusion.fn}}},
      {"items", items}};
}

std::string predictions_csv(const Evaluation& e) {
  std::ostringstream out;
  out << "id,truth,prediction,p_aligned\n" << std::setprecision(6) << std::fixed;
  for (std::size_t i = 0; i < e.ids.size(); ++i) {
    out << e.ids[i] << ',' << e.truth[i] << ',' << e.predictions[i] << ',' << e.p_aligned[i] << '\n';
  }
  return out.str();
}

} // namespace irda::reward
