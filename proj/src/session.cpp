#include "irda/session.hpp"

#include "irda/environment.hpp"
#include "irda/features.hpp"
#include "irda/reward.hpp"
#include "irda/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace irda::loop {

namespace {

constexpr std::array<std::string_view, 3> kPhaseNames{"constructing", "reducing", "done"};
constexpr std::array<std::string_view, 5> kPromptNames{"critique", "hypothesis", "explain", "label", "done"};

Phase phase_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kPhaseNames.size(); ++i) {
    if (kPhaseNames[i] == s) {
      return static_cast<Phase>(i);
    }
  }
  throw ValidationError("unknown phase '" + std::string(s) + "'");
}

template <typename T>
T field(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) {
    return fallback;
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("field '") + key + "' has the wrong type");
  }
}

PoolSpec pool_field(const nlohmann::json& pools, const char* key, PoolSpec fallback) {
  if (!pools.contains(key)) {
    return fallback;
  }
  const auto& p = pools.at(key);
  if (!p.is_object()) {
    throw ConfigError(std::string("field 'pools.") + key + "' must be an object");
  }
  PoolSpec out = fallback;
  out.seed = field<std::uint64_t>(p, "seed", fallback.seed);
  out.size = field<int>(p, "size", fallback.size);
  return out;
}

nlohmann::json pool_json(const PoolSpec& p) {
  return nlohmann::json{{"seed", p.seed}, {"size", p.size}};
}

nlohmann::json item_json(const Stimulus& s) {
  return nlohmann::json{{"id", s.id}, {"encoded", s.encoded}};
}

bool valid_id(const std::string& id) {
  return !id.empty() && id.size() <= 64 && std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
  });
}

} // namespace

std::string_view to_string(Phase p) {
  return kPhaseNames[static_cast<std::size_t>(p)];
}

std::string_view to_string(PromptKind k) {
  return kPromptNames[static_cast<std::size_t>(k)];
}

double score_uncertainty(const llm::LabelProbabilities& p) {
  return 1.0 - std::abs(p.p_aligned - p.p_misaligned);
}

SessionConfig SessionConfig::defaults_for(EnvKind env) {
  SessionConfig c;
  c.id = "session";
  c.env = env;
  c.value_concept = env::default_value_concept(env);
  c.k = env == EnvKind::AppleFarm ? 4 : 6;
  return c;
}

void SessionConfig::validate() const {
  if (!valid_id(id)) {
    throw ConfigError("id: must be 1-64 characters from [A-Za-z0-9_-]");
  }
  if (value_concept.empty()) {
    throw ConfigError("value_concept: must not be empty");
  }
  if (k < 1) {
    throw ConfigError("k: must be at least 1");
  }
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw ConfigError("epsilon: must lie in [0, 1]");
  }
  if (budget < 0) {
    throw ConfigError("budget: must be non-negative");
  }
  if (diversity.size < k) {
    throw ConfigError("pools.diversity.size: must be at least k");
  }
  if (uncertainty.size < 1 || test.size < 1) {
    throw ConfigError("pools: uncertainty and test pools need at least one item");
  }
  if (diversity.seed == uncertainty.seed || diversity.seed == test.seed || uncertainty.seed == test.seed) {
    throw ConfigError("pools: diversity, uncertainty and test pools need distinct seeds");
  }
  if (!behavior_mix.empty()) {
    if (env != EnvKind::AppleFarm) {
      throw ConfigError("behavior_mix: only applies to the applefarm environment");
    }
    try {
      applefarm::BehaviorMix::parse(behavior_mix).validate();
    } catch (const std::exception& e) {
      throw ConfigError(std::string("behavior_mix: ") + e.what());
    }
  }
}

nlohmann::json to_json(const SessionConfig& c) {
  return nlohmann::json{{"id", c.id},
                        {"env", std::string(to_string(c.env))},
                        {"value_concept", c.value_concept},
                        {"seed", c.seed},
                        {"k", c.k},
                        {"epsilon", c.epsilon},
                        {"budget", c.budget},
                        {"pools",
                         {{"diversity", pool_json(c.diversity)},
                          {"uncertainty", pool_json(c.uncertainty)},
                          {"test", pool_json(c.test)}}},
                        {"behavior_mix", c.behavior_mix},
                        {"context_budget", c.context_budget}};
}

SessionConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw ConfigError("session config must be a JSON object");
  }
  const std::string env_name = field<std::string>(j, "env", "applefarm");
  SessionConfig c = SessionConfig::defaults_for(env_from_string(env_name));
  c.id = field<std::string>(j, "id", c.id);
  c.value_concept = field<std::string>(j, "value_concept", c.value_concept);
  c.seed = field<std::uint64_t>(j, "seed", c.seed);
  c.k = field<int>(j, "k", c.k);
  c.epsilon = field<double>(j, "epsilon", c.epsilon);
  c.budget = field<int>(j, "budget", c.budget);
  c.behavior_mix = field<std::string>(j, "behavior_mix", c.behavior_mix);
  c.context_budget = field<std::size_t>(j, "context_budget", c.context_budget);
  if (j.contains("pools")) {
    const auto& pools = j.at("pools");
    if (!pools.is_object()) {
      throw ConfigError("field 'pools' must be an object");
    }
    c.diversity = pool_field(pools, "diversity", c.diversity);
    c.uncertainty = pool_field(pools, "uncertainty", c.uncertainty);
    c.test = pool_field(pools, "test", c.test);
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const Prompt& p) {
  nlohmann::json j{{"kind", std::string(to_string(p.kind))}, {"round", p.round}, {"iteration", p.iteration}};
  if (p.item != nullptr) {
    j["item"] = item_json(*p.item);
  }
  if (p.hypothesis) {
    j["hypothesis"] = llm::to_json(*p.hypothesis);
  }
  if (!p.items.empty()) {
    nlohmann::json items = nlohmann::json::array();
    for (const Stimulus* s : p.items) {
      items.push_back(item_json(*s));
    }
    j["items"] = items;
  }
  return j;
}

// --- Session --------------------------------------------------------------

Session Session::create(SessionConfig config, EventSink sink) {
  config.validate();
  Session s;
  s.sink_ = std::move(sink);
  s.emit(nlohmann::json{{"type", "created"}, {"config", to_json(config)}});

  std::vector<FeatureVector> rows;
  std::vector<std::string> ids;
  for (const auto& item : s.diversity_) {
    rows.push_back(item.features);
    ids.push_back(item.id);
  }
  const auto points = features::normalize_minmax(rows);
  const auto clustering = sampling::kmeans(points, s.config_.k, s.config_.seed);
  nlohmann::json reps = nlohmann::json::array();
  for (std::size_t idx : sampling::select_representatives(clustering, points, ids)) {
    reps.push_back(ids[idx]);
  }
  s.emit(nlohmann::json{{"type", "preprocessed"},
                        {"representatives", reps},
                        {"inertia", clustering.inertia},
                        {"lloyd_iterations", clustering.iterations}});
  return s;
}

Session Session::replay(const std::vector<nlohmann::json>& events, EventSink sink) {
  if (events.empty() || events.front().value("type", "") != "created") {
    throw ValidationError("a session log starts with a created event");
  }
  Session s;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].value("seq", -1L) != static_cast<long>(i)) {
      throw ValidationError("session log is out of sequence at entry " + std::to_string(i));
    }
    s.apply(events[i]);
    s.events_.push_back(events[i]);
  }
  s.sink_ = std::move(sink);
  return s;
}

void Session::emit(nlohmann::json event) {
  event["seq"] = static_cast<long>(events_.size());
  apply(event);
  events_.push_back(event);
  if (sink_) {
    sink_(events_.back());
  }
}

std::string Session::env_desc() const {
  return env::description(config_.env);
}

const Stimulus* Session::find_item(const std::string& id) const {
  const auto it = index_.find(id);
  return it == index_.end() ? nullptr : it->second;
}

void Session::build_pools() {
  diversity_ = env::make_pool(config_.env, config_.diversity.seed, config_.diversity.size, config_.behavior_mix);
  uncertainty_ = env::make_pool(config_.env, config_.uncertainty.seed, config_.uncertainty.size, config_.behavior_mix);
  test_ = env::make_pool(config_.env, config_.test.seed, config_.test.size, config_.behavior_mix);
  index_.clear();
  for (const auto* pool : {&diversity_, &uncertainty_, &test_}) {
    for (const auto& s : *pool) {
      if (!index_.emplace(s.id, &s).second) {
        throw ConfigError("pools share item id " + s.id);
      }
    }
  }
  remaining_.clear();
  for (const auto& s : uncertainty_) {
    remaining_.push_back(s.id);
  }
  std::sort(remaining_.begin(), remaining_.end());
}

void Session::apply(const nlohmann::json& event) {
  const std::string type = event.at("type").get<std::string>();
  const auto seq = event.at("seq").get<std::int64_t>();

  if (type == "created") {
    config_ = config_from_json(event.at("config"));
    build_pools();
    conversation_.append(llm::Turn{llm::Role::System, llm::TurnKind::System,
                                   llm::system_prompt(env_desc(), config_.value_concept, env::labels(config_.env)),
                                   "", -1, "", seq});
  } else if (type == "preprocessed") {
    representatives_.clear();
    for (const auto& id : event.at("representatives")) {
      const auto rid = id.get<std::string>();
      if (find_item(rid) == nullptr) {
        throw ValidationError("unknown representative " + rid);
      }
      representatives_.push_back(rid);
    }
  } else if (type == "feedback") {
    const auto item = llm::feedback_from_json(event.at("item"));
    const auto source = event.at("source").get<std::string>() == "uncertainty" ? FeedbackSource::Uncertainty
                                                                                : FeedbackSource::Representative;
    if (source == FeedbackSource::Representative) {
      if (phase_ != Phase::Constructing || next_rep_ >= representatives_.size() ||
          representatives_[next_rep_] != item.item_id) {
        throw ValidationError("feedback event does not match the expected representative");
      }
      ++next_rep_;
      bool replaced = false;
      for (std::size_t i = 0; i < feedback_.size(); ++i) {
        if (feedback_[i].item_id == item.item_id && sources_[i] == FeedbackSource::Representative) {
          feedback_[i] = item;
          replaced = true;
        }
      }
      if (!replaced) {
        feedback_.push_back(item);
        sources_.push_back(source);
      }
    } else {
      if (phase_ != Phase::Reducing || pending_selection_ != item.item_id) {
        throw ValidationError("feedback event does not match the selected item");
      }
      feedback_.push_back(item);
      sources_.push_back(source);
      remaining_.erase(std::remove(remaining_.begin(), remaining_.end(), item.item_id), remaining_.end());
      pending_selection_.reset();
      ++iterations_;
    }
    conversation_.append(llm::Turn{llm::Role::User, llm::TurnKind::Feedback, item.explanation, item.encoded,
                                   item.label, item.item_id, seq});
  } else if (type == "hypothesis") {
    pending_hypothesis_ = llm::hypothesis_from_json(event.at("hypothesis"));
    conversation_.append(
        llm::Turn{llm::Role::Assistant, llm::TurnKind::Hypothesis, pending_hypothesis_->prose, "", -1, "", seq});
  } else if (type == "response") {
    if (!pending_hypothesis_) {
      throw ValidationError("response event without a pending hypothesis");
    }
    pending_hypothesis_.reset();
    ++exchanges_;
    conversation_.append(llm::Turn{llm::Role::User, llm::TurnKind::Response, event.at("text").get<std::string>(), "",
                                   -1, "", seq});
  } else if (type == "uncertainty_scores") {
    std::vector<ScoredItem> scores;
    for (const auto& s : event.at("scores")) {
      scores.push_back(
          ScoredItem{s.at("id").get<std::string>(), s.at("p_aligned").get<double>(), s.at("uncertainty").get<double>()});
    }
    score_history_.push_back(std::move(scores));
  } else if (type == "selection") {
    pending_selection_ = event.at("id").get<std::string>();
    selections_.push_back(*pending_selection_);
  } else if (type == "phase_change") {
    const Phase to = phase_from_string(event.at("to").get<std::string>());
    if (to == Phase::Constructing) {
      ++round_;
      next_rep_ = 0;
    }
    if (static_cast<int>(to) < static_cast<int>(phase_)) {
      throw ValidationError("phases only move forward");
    }
    phase_ = to;
  } else if (type == "labels") {
    test_labels_.clear();
    for (const auto& [id, label] : event.at("labels").items()) {
      test_labels_[id] = label.get<int>();
    }
  } else if (type == "evaluation") {
    evaluation_ = event.at("report");
  } else {
    throw ValidationError("unknown event type '" + type + "'");
  }
}

Prompt Session::next(llm::Backend& backend) {
  Prompt p;
  p.round = round_;
  p.iteration = iterations_;
  if (phase_ == Phase::Constructing) {
    if (next_rep_ < representatives_.size()) {
      p.kind = PromptKind::Critique;
      p.item = find_item(representatives_[next_rep_]);
      return p;
    }
    if (!pending_hypothesis_) {
      auto h = backend.generate_hypothesis(env_desc(), feedback_);
      if (h.features.empty() || h.alternatives.empty()) {
        throw BackendError("hypothesis lacks features or alternatives");
      }
      emit(nlohmann::json{{"type", "hypothesis"}, {"hypothesis", llm::to_json(h)}});
    }
    p.kind = PromptKind::Hypothesis;
    p.hypothesis = pending_hypothesis_;
    return p;
  }

  if (phase_ == Phase::Reducing) {
    if (!pending_selection_) {
      if (iterations_ >= config_.budget || remaining_.empty()) {
        emit(nlohmann::json{{"type", "phase_change"}, {"from", "reducing"}, {"to", "done"}});
      } else {
        const llm::Conversation context =
            config_.context_budget > 0 ? conversation_.truncated(config_.context_budget) : conversation_;
        const LabelPair labels = env::labels(config_.env);
        std::vector<ScoredItem> scores;
        for (const auto& id : remaining_) {
          const auto probs = backend.query_label_probs(env_desc(), context, find_item(id)->encoded, labels);
          scores.push_back(ScoredItem{id, probs.p_aligned, score_uncertainty(probs)});
        }
        // remaining_ is sorted, so a strict comparison keeps the lowest id on ties.
        const ScoredItem* best = &scores.front();
        for (const auto& s : scores) {
          if (s.uncertainty > best->uncertainty) {
            best = &s;
          }
        }
        nlohmann::json payload = nlohmann::json::array();
        for (const auto& s : scores) {
          payload.push_back({{"id", s.id}, {"p_aligned", s.p_aligned}, {"uncertainty", s.uncertainty}});
        }
        const std::string best_id = best->id;
        const double best_u = best->uncertainty;
        emit(nlohmann::json{{"type", "uncertainty_scores"}, {"iteration", iterations_}, {"scores", payload}});
        if (best_u < config_.epsilon) {
          emit(nlohmann::json{{"type", "phase_change"}, {"from", "reducing"}, {"to", "done"}});
        } else {
          emit(nlohmann::json{{"type", "selection"}, {"id", best_id}, {"uncertainty", best_u}});
        }
      }
    }
    if (pending_selection_) {
      p.kind = PromptKind::Explain;
      p.item = find_item(*pending_selection_);
      return p;
    }
  }

  if (test_labels_.empty()) {
    p.kind = PromptKind::Label;
    for (const auto& s : test_) {
      p.items.push_back(&s);
    }
  } else {
    p.kind = PromptKind::Done;
  }
  return p;
}

void Session::submit_feedback(const std::string& item_id, int label, const std::string& explanation) {
  if (label != 0 && label != 1) {
    throw ValidationError("label must be 0 or 1");
  }
  if (explanation.empty()) {
    throw ValidationError("explanation must not be empty");
  }
  std::string source;
  if (phase_ == Phase::Constructing) {
    if (next_rep_ >= representatives_.size()) {
      throw PhaseError("the session is waiting for a hypothesis response, not a critique");
    }
    if (item_id != representatives_[next_rep_]) {
      throw ValidationError("expected a critique of " + representatives_[next_rep_] + ", got " + item_id);
    }
    source = "representative";
  } else if (phase_ == Phase::Reducing) {
    if (!pending_selection_) {
      throw PhaseError("no item is awaiting an explanation; fetch the next prompt first");
    }
    if (item_id != *pending_selection_) {
      throw ValidationError("expected an explanation of " + *pending_selection_ + ", got " + item_id);
    }
    source = "uncertainty";
  } else {
    throw PhaseError("the dialogue is over; feedback is no longer accepted");
  }
  const Stimulus* item = find_item(item_id);
  const llm::FeedbackItem f{item_id, item->encoded, label, explanation};
  emit(nlohmann::json{{"type", "feedback"}, {"source", source}, {"item", llm::to_json(f)}});
}

void Session::submit_response(const std::string& text, bool stable) {
  if (phase_ != Phase::Constructing || !pending_hypothesis_) {
    throw PhaseError("no hypothesis is awaiting a response");
  }
  if (text.empty()) {
    throw ValidationError("response text must not be empty");
  }
  emit(nlohmann::json{{"type", "response"}, {"text", text}, {"stable", stable}});
  emit(nlohmann::json{
      {"type", "phase_change"}, {"from", "constructing"}, {"to", stable ? "reducing" : "constructing"}});
}

void Session::submit_labels(const std::map<std::string, int>& labels) {
  if (phase_ != Phase::Done) {
    throw PhaseError("test labels are accepted once the dialogue is done");
  }
  if (!test_labels_.empty()) {
    throw PhaseError("test labels were already recorded");
  }
  std::set<std::string> expected;
  for (const auto& s : test_) {
    expected.insert(s.id);
  }
  for (const auto& [id, label] : labels) {
    if (!expected.contains(id)) {
      throw ValidationError("item " + id + " is not in the test pool");
    }
    if (label != 0 && label != 1) {
      throw ValidationError("label for " + id + " must be 0 or 1");
    }
  }
  if (labels.size() != expected.size()) {
    throw ValidationError("expected labels for all " + std::to_string(expected.size()) + " test items, got " +
                          std::to_string(labels.size()));
  }
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, label] : labels) {
    j[id] = label;
  }
  emit(nlohmann::json{{"type", "labels"}, {"labels", j}});
}

nlohmann::json Session::evaluate(llm::Backend& backend, const std::string& metric_name) {
  if (phase_ != Phase::Done || test_labels_.empty()) {
    throw PhaseError("evaluation needs a finished dialogue and test labels");
  }
  const auto metric = reward::metric_from_string(metric_name);
  std::vector<reward::LabeledItem> test_set;
  for (const auto& s : test_) {
    test_set.push_back(reward::LabeledItem{s.id, s.encoded, test_labels_.at(s.id)});
  }
  const auto irda = reward::evaluate(reward::build_irda_context(*this), test_set, metric, backend);
  const auto base = reward::evaluate(reward::build_baseline_context(*this), test_set, metric, backend);
  nlohmann::json report{{"metric", std::string(reward::to_string(metric))},
                        {"irda", reward::to_json(irda)},
                        {"baseline", reward::to_json(base)},
                        {"delta", irda.value - base.value}};
  emit(nlohmann::json{{"type", "evaluation"}, {"report", report}});
  return report;
}

nlohmann::json Session::state_json() const {
  nlohmann::json feedback = nlohmann::json::array();
  for (std::size_t i = 0; i < feedback_.size(); ++i) {
    auto f = llm::to_json(feedback_[i]);
    f["source"] = sources_[i] == FeedbackSource::Uncertainty ? "uncertainty" : "representative";
    feedback.push_back(f);
  }
  nlohmann::json j{{"id", config_.id},
                   {"env", std::string(to_string(config_.env))},
                   {"value_concept", config_.value_concept},
                   {"phase", std::string(to_string(phase_))},
                   {"config", to_json(config_)},
                   {"representatives", representatives_},
                   {"next_representative", next_rep_},
                   {"construction_round", round_},
                   {"hypothesis_exchanges", exchanges_},
                   {"uncertainty_iterations", iterations_},
                   {"selections", selections_},
                   {"remaining_uncertainty", remaining_.size()},
                   {"feedback", feedback},
                   {"conversation", llm::to_json(conversation_)},
                   {"test_labels", test_labels_.size()},
                   {"events", events_.size()}};
  j["pending_hypothesis"] = pending_hypothesis_ ? llm::to_json(*pending_hypothesis_) : nlohmann::json();
  j["pending_selection"] = pending_selection_ ? nlohmann::json(*pending_selection_) : nlohmann::json();
  j["evaluation"] = evaluation_ ? *evaluation_ : nlohmann::json();
  return j;
}

// --- drivers --------------------------------------------------------------

llm::FeedbackItem SimulatedUser::critique(const Stimulus& item) {
  return oracle::critique(model_, item);
}

std::pair<std::string, bool> SimulatedUser::respond(const llm::Hypothesis& h) {
  auto r = oracle::respond_to_hypothesis(model_, h);
  model_ = std::move(r.updated);
  return {r.text, r.stable};
}

std::map<std::string, int> SimulatedUser::label(const std::vector<const Stimulus*>& items) {
  std::map<std::string, int> out;
  for (const Stimulus* s : items) {
    out[s->id] = model_.settled_label(s->features);
  }
  return out;
}

void run_construction_loop(Session& s, UserHandle& user, llm::Backend& backend) {
  if (s.phase() != Phase::Constructing) {
    throw PhaseError("the construction loop has already finished");
  }
  while (s.phase() == Phase::Constructing) {
    const Prompt p = s.next(backend);
    if (p.kind == PromptKind::Critique) {
      const auto f = user.critique(*p.item);
      s.submit_feedback(p.item->id, f.label, f.explanation);
    } else if (p.kind == PromptKind::Hypothesis) {
      const auto [text, stable] = user.respond(*p.hypothesis);
      s.submit_response(text, stable);
    } else {
      break;
    }
  }
}

void run_uncertainty_loop(Session& s, UserHandle& user, llm::Backend& backend) {
  if (s.phase() != Phase::Reducing) {
    throw PhaseError("the uncertainty loop runs after the construction loop");
  }
  while (s.phase() == Phase::Reducing) {
    const Prompt p = s.next(backend);
    if (p.kind != PromptKind::Explain) {
      break;
    }
    const auto f = user.critique(*p.item);
    s.submit_feedback(p.item->id, f.label, f.explanation);
  }
}

void run_session(Session& s, UserHandle& user, llm::Backend& backend) {
  if (s.phase() == Phase::Constructing) {
    run_construction_loop(s, user, backend);
  }
  if (s.phase() == Phase::Reducing) {
    run_uncertainty_loop(s, user, backend);
  }
  const Prompt p = s.next(backend);
  if (p.kind == PromptKind::Label) {
    s.submit_labels(user.label(p.items));
  }
}

} // namespace irda::loop
