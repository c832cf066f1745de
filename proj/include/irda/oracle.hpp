#pragma once

#include "irda/common.hpp"
#include "irda/features.hpp"
#include "irda/llm.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <set>
#include <string>
#include <vector>

// Rule-based simulated participants.
namespace irda::oracle {

enum class Disclosure { Volunteered, Latent };

struct RuleEntry {
  features::Cue cue;
  int label = 0;
  Disclosure disclosure = Disclosure::Volunteered;

  bool operator==(const RuleEntry&) const = default;
};

/// A decision list over catalog cues: the first entry whose cue fires decides,
/// otherwise `default_label`. Latent entries shape labels but stay out of
/// explanations until a hypothesis names their feature.
struct UserModel {
  std::string id;
  EnvKind env = EnvKind::AppleFarm;
  std::vector<RuleEntry> rule;
  int default_label = 0;
  /// Entry the user only adds after the first hypothesis exchange.
  std::optional<RuleEntry> revision;
  int revision_position = 0;
  int stability_after = 1;
  int exchanges = 0;

  int label(const FeatureVector& f) const;
  /// Rule with any pending revision applied: what the user ends up believing.
  std::vector<RuleEntry> settled_rule() const;
  int settled_label(const FeatureVector& f) const;
  /// Features of the settled rule.
  std::set<int> rule_features() const;
  bool has_latent() const;

  bool operator==(const UserModel&) const = default;
};

void validate(const UserModel& u);

llm::FeedbackItem critique(const UserModel& u, const Stimulus& item);

struct HypothesisResponse {
  std::string text;
  UserModel updated;
  bool stable = false;
};

HypothesisResponse respond_to_hypothesis(const UserModel& u, const llm::Hypothesis& h);

struct PopulationOptions {
  double heterogeneity = 0.5;
  int min_latent = 1;
  double revision_fraction = 1.0 / 3.0;
  int rule_length = 3;
};

/// n >= 2 users. heterogeneity 0 gives identical settled rules; 1 gives rules
/// over disjoint feature subsets (wrapping around once users outnumber features).
std::vector<UserModel> make_population(EnvKind env, std::uint64_t seed, int n, const PopulationOptions& options);

nlohmann::json to_json(const UserModel& u);
UserModel user_from_json(const nlohmann::json& j);

} // namespace irda::oracle
