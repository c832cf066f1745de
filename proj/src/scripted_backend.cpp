#include "irda/scripted_backend.hpp"

#include "irda/environment.hpp"
#include "irda/phrasing.hpp"

#include <algorithm>
#include <cmath>

namespace irda::llm {

using features::Cue;

EnvKind env_from_description(const std::string& env_desc) {
  if (env_desc.find("applefarm-env/") != std::string::npos) {
    return EnvKind::AppleFarm;
  }
  if (env_desc.find("moralmachine-env/") != std::string::npos) {
    return EnvKind::MoralMachine;
  }
  throw BackendError("scripted backend: unrecognised environment description");
}

Knowledge ScriptedBackend::learn(EnvKind env, const LabelPair& labels, const Conversation& c) {
  Knowledge k;
  for (const auto& turn : c.turns()) {
    if (turn.role != Role::User || (turn.kind != TurnKind::Feedback && turn.kind != TurnKind::Response)) {
      continue;
    }
    std::vector<Cue> order;
    for (const auto& sentence : phrasing::split_sentences(turn.text)) {
      const auto s = phrasing::classify(env, labels, sentence);
      switch (s.kind) {
      case phrasing::SentenceKind::Statement:
        k.statements[s.cue] = s.label;
        k.denied.erase(s.cue.feature);
        order.push_back(s.cue);
        break;
      case phrasing::SentenceKind::Default:
        k.default_label = s.label;
        break;
      case phrasing::SentenceKind::Denial:
        k.denied.insert(s.feature);
        std::erase_if(k.statements, [&](const auto& kv) { return kv.first.feature == s.feature; });
        break;
      case phrasing::SentenceKind::Inarticulate:
      case phrasing::SentenceKind::Other:
        break;
      }
    }
    if (turn.kind != TurnKind::Feedback) {
      continue;
    }
    for (std::size_t i = 0; i < order.size(); ++i) {
      for (std::size_t j = i + 1; j < order.size(); ++j) {
        if (order[i] == order[j]) {
          continue;
        }
        k.precedes[{order[i], order[j]}] = true;
        k.precedes[{order[j], order[i]}] = false;
      }
    }
  }
  return k;
}

double ScriptedBackend::predict_aligned(const Knowledge& k, EnvKind env, const FeatureVector& features) {
  const auto& cat = features::catalog(env);
  std::vector<std::pair<Cue, int>> firing;
  for (const auto& [cue, label] : k.statements) {
    if (cat.fires(cue, features)) {
      firing.emplace_back(cue, label);
    }
  }
  if (firing.empty()) {
    int label = -1;
    if (k.default_label) {
      label = *k.default_label;
    } else if (!k.statements.empty()) {
      int ones = 0;
      for (const auto& kv : k.statements) {
        ones += kv.second;
      }
      const int zeros = static_cast<int>(k.statements.size()) - ones;
      if (ones != zeros) {
        label = ones > zeros ? 0 : 1;
      }
    }
    return label < 0 ? 0.5 : (label == 1 ? 0.9 : 0.1);
  }

  std::vector<int> winners;
  for (const auto& [cue, label] : firing) {
    const bool beaten = std::any_of(firing.begin(), firing.end(), [&](const auto& other) {
      if (other.first == cue) {
        return false;
      }
      const auto it = k.precedes.find({other.first, cue});
      return it != k.precedes.end() && it->second;
    });
    if (!beaten) {
      winners.push_back(label);
    }
  }
  if (winners.empty()) {
    for (const auto& kv : firing) {
      winners.push_back(kv.second);
    }
  }
  const double aligned = static_cast<double>(std::count(winners.begin(), winners.end(), 1));
  const double frac = aligned / static_cast<double>(winners.size());
  if (frac == 1.0) {
    return 0.9;
  }
  if (frac == 0.0) {
    return 0.1;
  }
  return 0.1 + 0.8 * frac;
}

LabelProbabilities ScriptedBackend::query_label_probs(const std::string& env_desc, const Conversation& c,
                                                      const std::string& encoded, const LabelPair& labels) {
  const EnvKind env = env_from_description(env_desc);
  FeatureVector f;
  try {
    f = env::features_from_encoded(env, encoded);
  } catch (const ValidationError& e) {
    throw BackendError(std::string("scripted backend cannot read the item: ") + e.what());
  }
  const double p = predict_aligned(learn(env, labels, c), env, f);
  auto out = LabelProbabilities::from_masses(p, 1.0 - p);
  out.raw[labels.aligned] = std::log(out.p_aligned);
  out.raw[labels.misaligned] = std::log(out.p_misaligned);
  return out;
}

Hypothesis ScriptedBackend::generate_hypothesis(const std::string& env_desc, const std::vector<FeedbackItem>& feedback) {
  if (feedback.empty()) {
    throw ValidationError("a hypothesis needs at least one feedback item");
  }
  const EnvKind env = env_from_description(env_desc);
  const auto& cat = features::catalog(env);
  const LabelPair labels = env::labels(env);
  const std::size_t d = cat.size();

  std::vector<bool> mentioned(d, false);
  std::vector<int> unexplained_hits(d, 0);
  std::vector<int> explained_hits(d, 0);
  for (const auto& item : feedback) {
    for (int f : phrasing::mentioned_features(env, item.explanation)) {
      mentioned[static_cast<std::size_t>(f)] = true;
    }
    bool explained = false;
    for (const auto& sentence : phrasing::split_sentences(item.explanation)) {
      const auto s = phrasing::classify(env, labels, sentence);
      if ((s.kind == phrasing::SentenceKind::Statement || s.kind == phrasing::SentenceKind::Default) &&
          s.label == item.label) {
        explained = true;
      }
    }
    FeatureVector fv;
    try {
      fv = env::features_from_encoded(env, item.encoded);
    } catch (const ValidationError& e) {
      throw BackendError(std::string("scripted backend cannot read a feedback item: ") + e.what());
    }
    for (std::size_t i = 0; i < d; ++i) {
      if (cat.active_sign(static_cast<int>(i), fv[i])) {
        (explained ? explained_hits : unexplained_hits)[i] += 1;
      }
    }
  }

  std::vector<int> absent;
  for (std::size_t i = 0; i < d; ++i) {
    if (!mentioned[i]) {
      absent.push_back(static_cast<int>(i));
    }
  }
  std::stable_sort(absent.begin(), absent.end(), [&](int a, int b) {
    const auto ua = static_cast<std::size_t>(a);
    const auto ub = static_cast<std::size_t>(b);
    if (unexplained_hits[ua] != unexplained_hits[ub]) {
      return unexplained_hits[ua] > unexplained_hits[ub];
    }
    return unexplained_hits[ua] > 0 && explained_hits[ua] < explained_hits[ub];
  });

  Hypothesis h;
  for (std::size_t i = 0; i < d; ++i) {
    if (mentioned[i]) {
      h.features.push_back(cat.features[i].name);
    }
  }
  std::size_t next = 0;
  if (h.features.empty()) {
    h.features.push_back(cat.features[static_cast<std::size_t>(absent[next++])].name);
  }
  for (; next < absent.size() && h.alternatives.size() < 2; ++next) {
    h.alternatives.push_back(cat.features[static_cast<std::size_t>(absent[next])].name);
  }

  auto join = [](const std::vector<std::string>& xs) {
    std::string out;
    for (const auto& x : xs) {
      out += (out.empty() ? "" : ", ") + x;
    }
    return out;
  };
  h.prose = "It looks like you are paying attention to: " + join(h.features) +
            ". Other things you could consider: " + join(h.alternatives) + ". Do these capture what matters to you?";
  return h;
}

} // namespace irda::llm
