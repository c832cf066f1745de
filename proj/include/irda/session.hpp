#pragma once

#include "irda/common.hpp"
#include "irda/llm.hpp"
#include "irda/oracle.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

// The dual dialogue loop as an event-sourced state machine. Every state change
// is an event; replaying a session's events rebuilds the same state.
namespace irda::loop {

enum class Phase { Constructing, Reducing, Done };

std::string_view to_string(Phase p);

struct PoolSpec {
  std::uint64_t seed = 1;
  int size = 40;

  bool operator==(const PoolSpec&) const = default;
};

struct SessionConfig {
  std::string id;
  EnvKind env = EnvKind::AppleFarm;
  std::string value_concept;
  std::uint64_t seed = 1; // clustering seed
  int k = 4;
  double epsilon = 0.5;
  int budget = 2;
  PoolSpec diversity{101, 40};
  PoolSpec uncertainty{202, 40};
  PoolSpec test{303, 50};
  std::string behavior_mix; // apple farm only; empty = uniform
  std::size_t context_budget = 0; // token budget for label queries, 0 = unlimited

  /// Fills env-dependent defaults (value concept, k) left empty/zero.
  static SessionConfig defaults_for(EnvKind env);
  void validate() const;
};

nlohmann::json to_json(const SessionConfig& c);
SessionConfig config_from_json(const nlohmann::json& j);

enum class PromptKind { Critique, Hypothesis, Explain, Label, Done };

std::string_view to_string(PromptKind k);

struct Prompt {
  PromptKind kind = PromptKind::Done;
  const Stimulus* item = nullptr;          // Critique, Explain
  std::optional<llm::Hypothesis> hypothesis; // Hypothesis
  std::vector<const Stimulus*> items;      // Label
  int round = 0;
  int iteration = 0;
};

nlohmann::json to_json(const Prompt& p);

enum class FeedbackSource { Representative, Uncertainty };

struct ScoredItem {
  std::string id;
  double p_aligned = 0.5;
  double uncertainty = 1.0;
};

using EventSink = std::function<void(const nlohmann::json&)>;

/// U = 1 - |p1 - p0|.
double score_uncertainty(const llm::LabelProbabilities& p);

class Session {
public:
  /// Builds pools, clusters T_D and records the `created` and `preprocessed` events.
  static Session create(SessionConfig config, EventSink sink = {});
  /// Rebuilds a session from its event log.
  static Session replay(const std::vector<nlohmann::json>& events, EventSink sink = {});

  Session(Session&&) = default;
  Session& operator=(Session&&) = default;
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  /// Current prompt. May consult the backend (hypothesis generation,
  /// uncertainty scoring) and record the resulting events. Backend failures
  /// leave the state untouched.
  Prompt next(llm::Backend& backend);

  /// Critique of the current representative, or the explanation for τ*.
  void submit_feedback(const std::string& item_id, int label, const std::string& explanation);
  void submit_response(const std::string& text, bool stable);
  void submit_labels(const std::map<std::string, int>& labels);
  /// Scores the IRDA and baseline contexts on the labeled test pool.
  nlohmann::json evaluate(llm::Backend& backend, const std::string& metric);

  const SessionConfig& config() const { return config_; }
  const std::string& id() const { return config_.id; }
  Phase phase() const { return phase_; }
  const std::vector<Stimulus>& diversity_pool() const { return diversity_; }
  const std::vector<Stimulus>& uncertainty_pool() const { return uncertainty_; }
  const std::vector<Stimulus>& test_pool() const { return test_; }
  const std::vector<std::string>& representatives() const { return representatives_; }
  const std::vector<llm::FeedbackItem>& feedback() const { return feedback_; }
  const std::vector<FeedbackSource>& feedback_sources() const { return sources_; }
  const llm::Conversation& conversation() const { return conversation_; }
  const std::vector<std::string>& remaining_uncertainty() const { return remaining_; }
  int hypothesis_exchanges() const { return exchanges_; }
  int construction_round() const { return round_; }
  int uncertainty_iterations() const { return iterations_; }
  const std::vector<std::vector<ScoredItem>>& score_history() const { return score_history_; }
  const std::vector<std::string>& selections() const { return selections_; }
  const std::map<std::string, int>& test_labels() const { return test_labels_; }
  const std::optional<nlohmann::json>& evaluation() const { return evaluation_; }
  const std::vector<nlohmann::json>& events() const { return events_; }
  const Stimulus* find_item(const std::string& id) const;

  nlohmann::json state_json() const;

private:
  Session() = default;
  void emit(nlohmann::json event);
  void apply(const nlohmann::json& event);
  void build_pools();
  std::string env_desc() const;

  SessionConfig config_;
  EventSink sink_;
  std::vector<nlohmann::json> events_;

  std::vector<Stimulus> diversity_;
  std::vector<Stimulus> uncertainty_;
  std::vector<Stimulus> test_;
  std::map<std::string, const Stimulus*> index_;

  Phase phase_ = Phase::Constructing;
  std::vector<std::string> representatives_;
  std::size_t next_rep_ = 0;
  int round_ = 0;
  std::optional<llm::Hypothesis> pending_hypothesis_;
  int exchanges_ = 0;
  std::vector<std::string> remaining_;
  std::optional<std::string> pending_selection_;
  int iterations_ = 0;
  std::vector<std::vector<ScoredItem>> score_history_;
  std::vector<std::string> selections_;
  std::vector<llm::FeedbackItem> feedback_;
  std::vector<FeedbackSource> sources_;
  llm::Conversation conversation_;
  std::map<std::string, int> test_labels_;
  std::optional<nlohmann::json> evaluation_;
};

/// Whoever answers the session's prompts.
class UserHandle {
public:
  virtual ~UserHandle() = default;
  virtual llm::FeedbackItem critique(const Stimulus& item) = 0;
  /// Returns (response text, user declares the mental model stable).
  virtual std::pair<std::string, bool> respond(const llm::Hypothesis& h) = 0;
  virtual std::map<std::string, int> label(const std::vector<const Stimulus*>& items) = 0;
};

class SimulatedUser : public UserHandle {
public:
  explicit SimulatedUser(oracle::UserModel model) : model_(std::move(model)) {}

  llm::FeedbackItem critique(const Stimulus& item) override;
  std::pair<std::string, bool> respond(const llm::Hypothesis& h) override;
  /// Labels with the settled rule.
  std::map<std::string, int> label(const std::vector<const Stimulus*>& items) override;

  const oracle::UserModel& model() const { return model_; }

private:
  oracle::UserModel model_;
};

/// Drives prompts until the construction loop ends (phase leaves constructing).
void run_construction_loop(Session& s, UserHandle& user, llm::Backend& backend);
/// Drives prompts until phase = done.
void run_uncertainty_loop(Session& s, UserHandle& user, llm::Backend& backend);
/// Both loops plus test labeling.
void run_session(Session& s, UserHandle& user, llm::Backend& backend);

} // namespace irda::loop
