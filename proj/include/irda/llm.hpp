#pragma once

#include "irda/common.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace irda::llm {

enum class Role { System, User, Assistant };
enum class TurnKind { System, Feedback, Hypothesis, Response };

std::string_view to_string(Role r);
std::string_view to_string(TurnKind k);

struct Turn {
  Role role = Role::User;
  TurnKind kind = TurnKind::Feedback;
  std::string text;
  std::string block; // encoded stimulus shown with a feedback turn
  int label = -1;    // feedback label, -1 when not applicable
  std::string item_id;
  std::int64_t timestamp = 0;

  bool operator==(const Turn&) const = default;
};

inline constexpr std::string_view kOmittedBlock = "[trajectory omitted]";

/// Append-only transcript; the first turn is the system turn.
class Conversation {
public:
  const std::vector<Turn>& turns() const { return turns_; }
  std::size_t size() const { return turns_.size(); }
  bool empty() const { return turns_.empty(); }

  /// Throws ValidationError when the first turn is not a system turn or a
  /// second system turn is appended.
  void append(Turn t);

  /// Rough token count: characters / 4, rounded up.
  std::size_t token_estimate() const;

  /// Copy whose oldest non-system stimulus blocks are replaced by a
  /// placeholder until the estimate fits `budget`. Turn texts are never cut.
  Conversation truncated(std::size_t budget) const;

  bool operator==(const Conversation&) const = default;

private:
  std::vector<Turn> turns_;
};

nlohmann::json to_json(const Turn& t);
Turn turn_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Conversation& c);
Conversation conversation_from_json(const nlohmann::json& j);

struct LabelProbabilities {
  double p_aligned = 0.5;
  double p_misaligned = 0.5;
  std::map<std::string, double> raw; // token -> logprob

  /// Renormalizes two non-negative masses; throws BackendError when both are 0.
  static LabelProbabilities from_masses(double aligned, double misaligned);
};

struct Hypothesis {
  std::vector<std::string> features;     // H
  std::vector<std::string> alternatives; // A
  std::string prose;

  bool operator==(const Hypothesis&) const = default;
};

nlohmann::json to_json(const Hypothesis& h);
Hypothesis hypothesis_from_json(const nlohmann::json& j);

struct FeedbackItem {
  std::string item_id;
  std::string encoded;
  int label = 0;
  std::string explanation;

  bool operator==(const FeedbackItem&) const = default;
};

nlohmann::json to_json(const FeedbackItem& f);
FeedbackItem feedback_from_json(const nlohmann::json& j);

/// f_LLM and G. Implementations must be safe to call from several threads.
class Backend {
public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;
  virtual LabelProbabilities query_label_probs(const std::string& env_desc, const Conversation& c,
                                               const std::string& encoded, const LabelPair& labels) = 0;
  virtual Hypothesis generate_hypothesis(const std::string& env_desc, const std::vector<FeedbackItem>& feedback) = 0;
};

/// System prompt that opens every conversation.
std::string system_prompt(const std::string& env_desc, const std::string& value_concept, const LabelPair& labels);

/// Chat-message rendering shared by prompt-based backends.
std::string render_turn(const Turn& t, const LabelPair& labels);

} // namespace irda::llm
