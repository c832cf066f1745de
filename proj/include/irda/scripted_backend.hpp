#pragma once

#include "irda/features.hpp"
#include "irda/llm.hpp"

#include <map>
#include <optional>
#include <set>
#include <utility>

namespace irda::llm {

/// Reads the environment tag out of an environment description.
EnvKind env_from_description(const std::string& env_desc);

/// What the scripted model takes away from the user turns of a conversation.
struct Knowledge {
  std::map<features::Cue, int> statements; // cue -> label, later statements win
  std::set<int> denied;                    // features the user said do not matter
  std::optional<int> default_label;        // from "nothing I care about" sentences
  /// (a, b) -> true when a was last mentioned before b inside one critique.
  std::map<std::pair<features::Cue, features::Cue>, bool> precedes;
};

/// Deterministic stand-in for an LLM.
///
/// Label query: collect the cited cues that fire on the queried item. Cues no
/// other firing cue precedes are the winners. Unanimous winners give 0.9 for
/// their label; a split gives p_aligned = 0.1 + 0.8 * (aligned share). With no
/// firing cue the default label gets 0.9 (explicit default, else the opposite
/// of the majority statement label, else 0.5).
///
/// Hypothesis: H = catalog features the explanations mention; A = the two
/// absent features ranked by how many unexplained critiques they fire on, then
/// by how rarely they fire on explained ones, then catalog order.
class ScriptedBackend : public Backend {
public:
  std::string name() const override { return "scripted"; }
  LabelProbabilities query_label_probs(const std::string& env_desc, const Conversation& c, const std::string& encoded,
                                       const LabelPair& labels) override;
  Hypothesis generate_hypothesis(const std::string& env_desc, const std::vector<FeedbackItem>& feedback) override;

  static Knowledge learn(EnvKind env, const LabelPair& labels, const Conversation& c);
  static double predict_aligned(const Knowledge& k, EnvKind env, const FeatureVector& features);
};

} // namespace irda::llm
