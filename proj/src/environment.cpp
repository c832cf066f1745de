#include "irda/environment.hpp"

#include "irda/applefarm.hpp"
#include "irda/moralmachine.hpp"

namespace irda::env {

std::string description(EnvKind env) {
  return env == EnvKind::AppleFarm ? applefarm::env_description() : moralmachine::env_description();
}

LabelPair labels(EnvKind env) {
  if (env == EnvKind::AppleFarm) {
    return LabelPair{"respectful", "disrespectful"};
  }
  return LabelPair{"swerve", "stay"};
}

std::string default_value_concept(EnvKind env) {
  return env == EnvKind::AppleFarm ? "respectfulness" : "the right choice for the car";
}

std::vector<Stimulus> make_pool(EnvKind env, std::uint64_t seed, int count, std::string_view behavior_mix) {
  std::vector<Stimulus> out;
  if (env == EnvKind::AppleFarm) {
    const auto mix =
        behavior_mix.empty() ? applefarm::BehaviorMix::uniform() : applefarm::BehaviorMix::parse(behavior_mix);
    for (const auto& t : applefarm::generate_pool(seed, count, mix)) {
      out.push_back(Stimulus{t.id, applefarm::encode_ascii(t), features::featurize(t), applefarm::tensor_encoding(t)});
    }
    return out;
  }
  for (const auto& s : moralmachine::generate_scenarios(seed, count)) {
    const auto v = moralmachine::encode_vector(s);
    out.push_back(Stimulus{s.id, moralmachine::encode_text(s), features::featurize(s), {v.begin(), v.end()}});
  }
  return out;
}

FeatureVector features_from_encoded(EnvKind env, std::string_view encoded) {
  if (env == EnvKind::AppleFarm) {
    return features::featurize(applefarm::trajectory_from_ascii(encoded));
  }
  return features::featurize(moralmachine::parse_text(encoded));
}

} // namespace irda::env
