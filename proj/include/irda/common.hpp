#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace irda {

/// Error raised for invalid run configuration (bad sizes, weights, seeds).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Error raised when a value violates a domain invariant.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Failure inside an LLM backend (transport, unparseable output, unmatched labels).
class BackendError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Submission that does not fit the session's current phase.
class PhaseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class NotFoundError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// SplitMix64 finalizer; derives independent sub-seeds from (seed, stream).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

enum class EnvKind { AppleFarm, MoralMachine };

std::string_view to_string(EnvKind env);
EnvKind env_from_string(std::string_view name);

/// The two label words the reward model chooses between. Label 1 is `aligned`.
struct LabelPair {
  std::string aligned;
  std::string misaligned;

  const std::string& word(int label) const { return label == 1 ? aligned : misaligned; }
  bool operator==(const LabelPair&) const = default;
};

/// Named real-valued feature vector; `names` is parallel to `values`.
struct FeatureVector {
  std::vector<double> values;
  std::vector<std::string> names;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  bool operator==(const FeatureVector&) const = default;
};

/// An environment item ready for the dialogue: a trajectory or a dilemma scenario.
struct Stimulus {
  std::string id;
  std::string encoded;             // alpha(tau): what humans and the LLM read
  FeatureVector features;          // raw catalog features
  std::vector<double> model_input; // tensor encoding for the supervised baselines
};

} // namespace irda
