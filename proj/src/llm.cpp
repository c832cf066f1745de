#include "irda/llm.hpp"

#include <array>
#include <cmath>

namespace irda::llm {

namespace {

constexpr std::array<std::string_view, 3> kRoleNames{"system", "user", "assistant"};
constexpr std::array<std::string_view, 4> kKindNames{"system", "feedback", "hypothesis", "response"};

template <std::size_t N>
int index_in(const std::array<std::string_view, N>& names, std::string_view value, const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == value) {
      return static_cast<int>(i);
    }
  }
  throw ValidationError(std::string("unknown ") + what + " '" + std::string(value) + "'");
}

} // namespace

std::string_view to_string(Role r) {
  return kRoleNames[static_cast<std::size_t>(r)];
}

std::string_view to_string(TurnKind k) {
  return kKindNames[static_cast<std::size_t>(k)];
}

void Conversation::append(Turn t) {
  const bool system = t.kind == TurnKind::System;
  if (turns_.empty() != system) {
    throw ValidationError("a conversation opens with exactly one system turn");
  }
  turns_.push_back(std::move(t));
}

std::size_t Conversation::token_estimate() const {
  std::size_t chars = 0;
  for (const auto& t : turns_) {
    chars += t.text.size() + t.block.size();
  }
  return (chars + 3) / 4;
}

Conversation Conversation::truncated(std::size_t budget) const {
  Conversation out = *this;
  for (auto& t : out.turns_) {
    if (out.token_estimate() <= budget) {
      break;
    }
    if (t.kind != TurnKind::System && !t.block.empty() && t.block != kOmittedBlock) {
      t.block = std::string(kOmittedBlock);
    }
  }
  return out;
}

nlohmann::json to_json(const Turn& t) {
  nlohmann::json j{{"role", std::string(to_string(t.role))},
                   {"kind", std::string(to_string(t.kind))},
                   {"text", t.text},
                   {"timestamp", t.timestamp}};
  if (!t.block.empty()) {
    j["block"] = t.block;
  }
  if (t.label >= 0) {
    j["label"] = t.label;
  }
  if (!t.item_id.empty()) {
    j["item_id"] = t.item_id;
  }
  return j;
}

Turn turn_from_json(const nlohmann::json& j) {
  Turn t;
  t.role = static_cast<Role>(index_in(kRoleNames, j.at("role").get<std::string>(), "role"));
  t.kind = static_cast<TurnKind>(index_in(kKindNames, j.at("kind").get<std::string>(), "turn kind"));
  t.text = j.at("text").get<std::string>();
  t.timestamp = j.value("timestamp", std::int64_t{0});
  t.block = j.value("block", std::string());
  t.label = j.value("label", -1);
  t.item_id = j.value("item_id", std::string());
  return t;
}

nlohmann::json to_json(const Conversation& c) {
  nlohmann::json turns = nlohmann::json::array();
  for (const auto& t : c.turns()) {
    turns.push_back(to_json(t));
  }
  return nlohmann::json{{"turns", turns}, {"token_estimate", c.token_estimate()}};
}

Conversation conversation_from_json(const nlohmann::json& j) {
  Conversation c;
  for (const auto& t : j.at("turns")) {
    c.append(turn_from_json(t));
  }
  return c;
}

LabelProbabilities LabelProbabilities::from_masses(double aligned, double misaligned) {
  if (!(aligned >= 0.0) || !(misaligned >= 0.0) || !std::isfinite(aligned) || !std::isfinite(misaligned)) {
    throw BackendError("label masses must be finite and non-negative");
  }
  const double total = aligned + misaligned;
  if (total <= 0.0) {
    throw BackendError("neither label received probability mass");
  }
  LabelProbabilities p;
  p.p_aligned = aligned / total;
  p.p_misaligned = 1.0 - p.p_aligned;
  return p;
}

nlohmann::json to_json(const Hypothesis& h) {
  return nlohmann::json{{"features", h.features}, {"alternatives", h.alternatives}, {"prose", h.prose}};
}

Hypothesis hypothesis_from_json(const nlohmann::json& j) {
  Hypothesis h;
  h.features = j.at("features").get<std::vector<std::string>>();
  h.alternatives = j.at("alternatives").get<std::vector<std::string>>();
  h.prose = j.value("prose", std::string());
  return h;
}

nlohmann::json to_json(const FeedbackItem& f) {
  return nlohmann::json{
      {"item_id", f.item_id}, {"encoded", f.encoded}, {"label", f.label}, {"explanation", f.explanation}};
}

FeedbackItem feedback_from_json(const nlohmann::json& j) {
  FeedbackItem f;
  f.item_id = j.value("item_id", std::string());
  f.encoded = j.at("encoded").get<std::string>();
  f.label = j.at("label").get<int>();
  f.explanation = j.at("explanation").get<std::string>();
  return f;
}

std::string system_prompt(const std::string& env_desc, const std::string& value_concept, const LabelPair& labels) {
  return env_desc + "\nThe user will teach you what they mean by " + value_concept +
         ". They will show you examples with a label and an explanation. When asked about a new example, answer "
         "with exactly one word: " +
         labels.aligned + " or " + labels.misaligned + ".";
}

std::string render_turn(const Turn& t, const LabelPair& labels) {
  switch (t.kind) {
  case TurnKind::System:
  case TurnKind::Hypothesis:
  case TurnKind::Response:
    return t.text;
  case TurnKind::Feedback:
    break;
  }
  std::string out = "Example:\n" + t.block + "\n";
  if (t.label >= 0) {
    out += "Label: " + labels.word(t.label) + "\n";
  }
  return out + "Explanation: " + t.text;
}

} // namespace irda::llm
