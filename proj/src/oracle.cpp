#include "irda/oracle.hpp"

#include "irda/environment.hpp"
#include "irda/phrasing.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <random>

namespace irda::oracle {

namespace {

using features::Cue;

std::string lower_first(std::string s) {
  if (!s.empty()) {
    s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
  }
  return s;
}

int decide(const std::vector<RuleEntry>& rule, int default_label, const features::Catalog& cat,
           const FeatureVector& f) {
  for (const auto& e : rule) {
    if (cat.fires(e.cue, f)) {
      return e.label;
    }
  }
  return default_label;
}

std::string entry_statement(EnvKind env, const RuleEntry& e) {
  const auto& cat = features::catalog(env);
  return phrasing::statement(env, cat.phrase(e.cue), env::labels(env).word(e.label));
}

// Features a simulated user can hold a rule about. Intervention-required fires
// on every dilemma, so a rule over it would never let later entries speak.
std::vector<int> drawable_features(EnvKind env) {
  const auto& cat = features::catalog(env);
  std::vector<int> out;
  for (std::size_t i = 0; i < cat.size(); ++i) {
    if (cat.features[i].name != "intervention-required") {
      out.push_back(static_cast<int>(i));
    }
  }
  return out;
}

int coin(std::mt19937_64& rng) {
  return std::uniform_int_distribution<int>(0, 1)(rng);
}

RuleEntry draw_entry(EnvKind env, const std::vector<int>& candidates, const std::vector<double>& weights,
                     std::mt19937_64& rng) {
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  const int f = candidates[pick(rng)];
  const auto& spec = features::catalog(env).features[static_cast<std::size_t>(f)];
  RuleEntry e;
  e.cue = Cue{f, 1};
  if (spec.trigger == features::Trigger::Signed) {
    e.cue.sign = coin(rng) == 1 ? 1 : -1;
  }
  e.label = coin(rng);
  return e;
}

// Earlier catalog features are drawn more often.
constexpr double kRankDecay = 0.8;

struct Drawer {
  EnvKind env;
  std::vector<int> drawable;

  std::optional<RuleEntry> draw(const std::vector<int>& pool, const std::vector<RuleEntry>& used,
                                std::mt19937_64& rng) const {
    std::vector<int> candidates;
    std::vector<double> weights;
    for (int f : pool) {
      const bool taken = std::any_of(used.begin(), used.end(), [&](const RuleEntry& e) { return e.cue.feature == f; });
      if (taken) {
        continue;
      }
      const auto rank = std::find(drawable.begin(), drawable.end(), f) - drawable.begin();
      candidates.push_back(f);
      weights.push_back(std::pow(kRankDecay, static_cast<double>(rank)));
    }
    if (candidates.empty()) {
      return std::nullopt;
    }
    return draw_entry(env, candidates, weights, rng);
  }
};

} // namespace

int UserModel::label(const FeatureVector& f) const {
  return decide(rule, default_label, features::catalog(env), f);
}

std::vector<RuleEntry> UserModel::settled_rule() const {
  std::vector<RuleEntry> out = rule;
  if (revision) {
    const auto pos = std::min<std::size_t>(static_cast<std::size_t>(revision_position), out.size());
    out.insert(out.begin() + static_cast<std::ptrdiff_t>(pos), *revision);
  }
  return out;
}

int UserModel::settled_label(const FeatureVector& f) const {
  return decide(settled_rule(), default_label, features::catalog(env), f);
}

std::set<int> UserModel::rule_features() const {
  std::set<int> out;
  for (const auto& e : settled_rule()) {
    out.insert(e.cue.feature);
  }
  return out;
}

bool UserModel::has_latent() const {
  return std::any_of(rule.begin(), rule.end(), [](const RuleEntry& e) { return e.disclosure == Disclosure::Latent; });
}

void validate(const UserModel& u) {
  const auto& cat = features::catalog(u.env);
  std::set<int> seen;
  for (const auto& e : u.settled_rule()) {
    if (e.cue.feature < 0 || static_cast<std::size_t>(e.cue.feature) >= cat.size()) {
      throw ValidationError("user " + u.id + ": rule feature out of range");
    }
    if (e.label != 0 && e.label != 1) {
      throw ValidationError("user " + u.id + ": rule labels must be 0 or 1");
    }
    if (!seen.insert(e.cue.feature).second) {
      throw ValidationError("user " + u.id + ": a feature appears twice in the rule");
    }
    if (cat.phrase(e.cue).empty()) {
      throw ValidationError("user " + u.id + ": cue has no phrase");
    }
  }
  if (u.default_label != 0 && u.default_label != 1) {
    throw ValidationError("user " + u.id + ": default label must be 0 or 1");
  }
  if (u.stability_after < 1) {
    throw ValidationError("user " + u.id + ": stability_after must be at least 1");
  }
}

llm::FeedbackItem critique(const UserModel& u, const Stimulus& item) {
  const auto& cat = features::catalog(u.env);
  const LabelPair labels = env::labels(u.env);
  std::vector<const RuleEntry*> fired;
  for (const auto& e : u.rule) {
    if (cat.fires(e.cue, item.features)) {
      fired.push_back(&e);
    }
  }
  const int label = fired.empty() ? u.default_label : fired.front()->label;
  std::string explanation;
  for (const RuleEntry* e : fired) {
    if (e->disclosure == Disclosure::Volunteered) {
      explanation += (explanation.empty() ? "" : " ") + entry_statement(u.env, *e);
    }
  }
  if (fired.empty()) {
    explanation = phrasing::default_statement(u.env, labels.word(label));
  } else if (explanation.empty()) {
    explanation = phrasing::inarticulate(u.env, labels.word(label));
  }
  return llm::FeedbackItem{item.id, item.encoded, label, explanation};
}

HypothesisResponse respond_to_hypothesis(const UserModel& u, const llm::Hypothesis& h) {
  const auto& cat = features::catalog(u.env);
  UserModel v = u;
  std::vector<std::string> parts;
  if (v.revision) {
    v.rule = v.settled_rule();
    parts.push_back("Thinking about it more, " + lower_first(entry_statement(v.env, *v.revision)));
    v.revision.reset();
  }

  std::set<int> handled;
  auto answer = [&](const std::string& name) {
    std::vector<int> named;
    if (const int idx = cat.index_of(name); idx >= 0) {
      named.push_back(idx);
    } else {
      named = phrasing::mentioned_features(v.env, name);
    }
    for (int f : named) {
      if (!handled.insert(f).second) {
        continue;
      }
      auto it = std::find_if(v.rule.begin(), v.rule.end(), [&](const RuleEntry& e) { return e.cue.feature == f; });
      if (it == v.rule.end()) {
        parts.push_back(phrasing::denial(cat.features[static_cast<std::size_t>(f)].name));
      } else if (it->disclosure == Disclosure::Latent) {
        it->disclosure = Disclosure::Volunteered;
        parts.push_back("You are right, I had not mentioned that. " + entry_statement(v.env, *it));
      } else {
        parts.push_back("Yes, " + lower_first(entry_statement(v.env, *it)));
      }
    }
  };
  for (const auto& name : h.features) {
    answer(name);
  }
  for (const auto& name : h.alternatives) {
    answer(name);
  }

  v.exchanges += 1;
  HypothesisResponse out;
  for (const auto& p : parts) {
    out.text += (out.text.empty() ? "" : " ") + p;
  }
  if (out.text.empty()) {
    out.text = "I have nothing to add.";
  }
  out.stable = v.exchanges >= v.stability_after;
  out.updated = std::move(v);
  return out;
}

std::vector<UserModel> make_population(EnvKind env, std::uint64_t seed, int n, const PopulationOptions& options) {
  if (n < 2) {
    throw ConfigError("a population needs at least 2 users");
  }
  if (!(options.heterogeneity >= 0.0 && options.heterogeneity <= 1.0)) {
    throw ConfigError("heterogeneity must lie in [0, 1]");
  }
  if (!(options.revision_fraction >= 0.0 && options.revision_fraction <= 1.0)) {
    throw ConfigError("revision_fraction must lie in [0, 1]");
  }
  if (options.rule_length < 1 || options.min_latent < 0 || options.min_latent > options.rule_length) {
    throw ConfigError("rule_length must be >= 1 and min_latent within [0, rule_length]");
  }

  const Drawer drawer{env, drawable_features(env)};
  const auto& all = drawer.drawable;
  const double h = options.heterogeneity;
  // Chance that a rule slot is private rather than the shared one.
  const double p_private = std::pow(h, 1.5);

  std::mt19937_64 shared_rng(mix_seed(seed, 0xc0));
  std::vector<RuleEntry> consensus;
  for (int s = 0; s < options.rule_length; ++s) {
    if (auto e = drawer.draw(all, consensus, shared_rng)) {
      consensus.push_back(*e);
    }
  }
  const int groups = std::min<int>(n, static_cast<int>(all.size()));
  std::vector<UserModel> users;
  for (int i = 0; i < n; ++i) {
    std::mt19937_64 rng(mix_seed(seed, 0x100 + static_cast<std::uint64_t>(i)));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<int> partition;
    for (std::size_t j = 0; j < all.size(); ++j) {
      if (static_cast<int>(j) % groups == i % groups) {
        partition.push_back(all[j]);
      }
    }

    UserModel u;
    char id[16];
    std::snprintf(id, sizeof(id), "u%02d", i);
    u.id = id;
    u.env = env;
    for (std::size_t s = 0; s < consensus.size(); ++s) {
      const bool priv = u01(rng) < p_private;
      std::optional<RuleEntry> e;
      if (priv) {
        e = drawer.draw(partition, u.rule, rng);
      } else if (std::none_of(u.rule.begin(), u.rule.end(),
                              [&](const RuleEntry& r) { return r.cue.feature == consensus[s].cue.feature; })) {
        e = consensus[s];
      }
      if (e) {
        u.rule.push_back(*e);
      }
    }
    if (u.rule.empty()) {
      u.rule.push_back(*drawer.draw(partition, u.rule, rng));
    }
    // The user's leading concern sets what everything else counts as.
    u.default_label = 1 - u.rule.front().label;

    const int latent = std::min<int>(options.min_latent, static_cast<int>(u.rule.size()));
    for (int j = 0; j < latent; ++j) {
      u.rule[static_cast<std::size_t>(j)].disclosure = Disclosure::Latent;
    }

    const bool reviser = u01(rng) < options.revision_fraction;
    if (reviser && u.rule.size() >= 2 && static_cast<std::size_t>(latent) < u.rule.size()) {
      u.revision_position = latent;
      u.revision = u.rule[static_cast<std::size_t>(latent)];
      u.rule.erase(u.rule.begin() + latent);
      u.stability_after = 2;
    }
    validate(u);
    users.push_back(std::move(u));
  }
  return users;
}

nlohmann::json to_json(const UserModel& u) {
  const auto& cat = features::catalog(u.env);
  auto entry_json = [&](const RuleEntry& e) {
    return nlohmann::json{{"feature", cat.features[static_cast<std::size_t>(e.cue.feature)].name},
                          {"sign", e.cue.sign},
                          {"label", e.label},
                          {"disclosure", e.disclosure == Disclosure::Latent ? "latent" : "volunteered"}};
  };
  nlohmann::json rule = nlohmann::json::array();
  for (const auto& e : u.rule) {
    rule.push_back(entry_json(e));
  }
  nlohmann::json j{{"id", u.id},
                   {"env", std::string(to_string(u.env))},
                   {"rule", rule},
                   {"default_label", u.default_label},
                   {"stability_after", u.stability_after},
                   {"exchanges", u.exchanges}};
  if (u.revision) {
    j["revision"] = entry_json(*u.revision);
    j["revision_position"] = u.revision_position;
  }
  return j;
}

UserModel user_from_json(const nlohmann::json& j) {
  try {
    UserModel u;
    u.id = j.at("id").get<std::string>();
    u.env = env_from_string(j.at("env").get<std::string>());
    const auto& cat = features::catalog(u.env);
    auto entry = [&](const nlohmann::json& e) {
      RuleEntry r;
      const auto name = e.at("feature").get<std::string>();
      r.cue.feature = cat.index_of(name);
      if (r.cue.feature < 0) {
        throw ValidationError("unknown feature '" + name + "'");
      }
      r.cue.sign = e.value("sign", 1);
      r.label = e.at("label").get<int>();
      r.disclosure = e.value("disclosure", std::string("volunteered")) == "latent" ? Disclosure::Latent
                                                                                   : Disclosure::Volunteered;
      return r;
    };
    for (const auto& e : j.at("rule")) {
      u.rule.push_back(entry(e));
    }
    u.default_label = j.at("default_label").get<int>();
    u.stability_after = j.value("stability_after", 1);
    u.exchanges = j.value("exchanges", 0);
    if (j.contains("revision")) {
      u.revision = entry(j.at("revision"));
      u.revision_position = j.value("revision_position", 0);
    }
    validate(u);
    return u;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed user model: ") + e.what());
  }
}

} // namespace irda::oracle
