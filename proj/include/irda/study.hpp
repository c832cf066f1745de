#pragma once

#include "irda/common.hpp"
#include "irda/curves.hpp"
#include "irda/llm.hpp"
#include "irda/oracle.hpp"
#include "irda/reward.hpp"
#include "irda/session.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <string>

// Experiment manifests and the simulated-study runner behind `irda run`.
namespace irda::study {

struct MlpSpec {
  bool enabled = true;
  int max_samples = 30;
  int epochs = 200;
  std::vector<int> counts; // empty = 1..max_samples
};

struct Manifest {
  EnvKind env = EnvKind::AppleFarm;
  std::string value_concept;
  std::uint64_t seed = 1;
  bool interactive = false;
  int users = 20;
  oracle::PopulationOptions population;
  int k = 4;
  double epsilon = 0.5;
  int budget = 2;
  std::string backend = "scripted";
  loop::PoolSpec diversity{101, 40};
  loop::PoolSpec uncertainty{202, 40};
  std::uint64_t test_seed = 303;
  loop::PoolSpec train{404, 80};
  int test_size = 50;
  reward::Metric metric = reward::Metric::BalancedAccuracy;
  MlpSpec mlp;
  int bootstrap_resamples = stats::kDefaultResamples;
  std::string behavior_mix;
  std::size_t context_budget = 0;

  /// Session configuration shared by every simulated participant.
  loop::SessionConfig session_config(const std::string& id) const;
  void validate() const;
};

/// Throws ConfigError naming the offending field.
Manifest manifest_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Manifest& m);

using Progress = std::function<void(const std::string&)>;

/// Runs every simulated user through the dialogue, evaluates IRDA and the
/// baseline context, builds MLP curves and the agreement statistics.
nlohmann::json run_study(const Manifest& m, llm::Backend& backend, const Progress& progress = {});

} // namespace irda::study
