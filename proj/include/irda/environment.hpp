#pragma once

#include "irda/common.hpp"
#include "irda/features.hpp"

#include <string>
#include <string_view>
#include <vector>

// Uniform view over both environments: what the dialogue, the oracle users,
// and the baselines need from a stimulus pool.
namespace irda::env {

std::string description(EnvKind env);
LabelPair labels(EnvKind env);
std::string default_value_concept(EnvKind env);

/// Generates `count` stimuli. `behavior_mix` applies to the apple farm only
/// (empty = uniform).
std::vector<Stimulus> make_pool(EnvKind env, std::uint64_t seed, int count, std::string_view behavior_mix = {});

/// Recovers catalog features from an encoded stimulus (ASCII frames or scenario text).
FeatureVector features_from_encoded(EnvKind env, std::string_view encoded);

} // namespace irda::env
