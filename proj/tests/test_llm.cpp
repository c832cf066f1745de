#include "irda/environment.hpp"
#include "irda/features.hpp"
#include "irda/http_backend.hpp"
#include "irda/phrasing.hpp"
#include "irda/scripted_backend.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <deque>
#include <mutex>
#include <thread>

using namespace irda;
using namespace irda::llm;

namespace {

Conversation opened(EnvKind env) {
  Conversation c;
  Turn sys;
  sys.role = Role::System;
  sys.kind = TurnKind::System;
  sys.text = system_prompt(env::description(env), env::default_value_concept(env), env::labels(env));
  c.append(sys);
  return c;
}

Turn critique(const Stimulus& s, int label, std::string text, std::int64_t ts) {
  Turn t;
  t.role = Role::User;
  t.kind = TurnKind::Feedback;
  t.text = std::move(text);
  t.block = s.encoded;
  t.label = label;
  t.item_id = s.id;
  t.timestamp = ts;
  return t;
}

double feature(const Stimulus& s, const char* name) {
  return s.features[static_cast<std::size_t>(features::applefarm_catalog().index_of(name))];
}

// One stimulus that left the main quadrant and one that never did.
std::pair<Stimulus, Stimulus> leaver_and_stayer() {
  const auto pool = env::make_pool(EnvKind::AppleFarm, 61, 60);
  std::optional<Stimulus> leaver;
  std::optional<Stimulus> stayer;
  for (const auto& s : pool) {
    const double out = feature(s, "steps-outside-own-quadrant");
    if (out > 0 && !leaver) {
      leaver = s;
    }
    if (out == 0 && !stayer) {
      stayer = s;
    }
  }
  EXPECT_TRUE(leaver && stayer);
  return {*leaver, *stayer};
}

} // namespace

TEST(Conversation, FirstTurnMustBeSystem) {
  Conversation c;
  Turn t;
  t.kind = TurnKind::Feedback;
  EXPECT_THROW(c.append(t), ValidationError);
  auto ok = opened(EnvKind::AppleFarm);
  Turn again;
  again.role = Role::System;
  again.kind = TurnKind::System;
  EXPECT_THROW(ok.append(again), ValidationError);
  EXPECT_NE(ok.turns().front().text.find(env::description(EnvKind::AppleFarm)), std::string::npos);
}

TEST(Conversation, JsonRoundTrip) {
  auto c = opened(EnvKind::MoralMachine);
  const auto s = env::make_pool(EnvKind::MoralMachine, 2, 1).front();
  c.append(critique(s, 1, "Fine.", 1));
  EXPECT_EQ(conversation_from_json(to_json(c)), c);
}

TEST(Conversation, TruncationDropsOldestBlocksNeverExplanations) {
  auto c = opened(EnvKind::AppleFarm);
  const auto pool = env::make_pool(EnvKind::AppleFarm, 3, 6);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    c.append(critique(pool[i], 1, "Explanation number " + std::to_string(i) + ".", static_cast<std::int64_t>(i + 1)));
  }
  const std::size_t budget = c.token_estimate() - 200;
  const auto t = c.truncated(budget);
  EXPECT_LE(t.token_estimate(), budget);
  ASSERT_EQ(t.size(), c.size());
  EXPECT_EQ(t.turns()[1].block, kOmittedBlock);
  EXPECT_EQ(t.turns().back().block, c.turns().back().block);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(t.turns()[i].text, c.turns()[i].text);
  }
  EXPECT_EQ(c.truncated(c.token_estimate()), c);
}

TEST(LabelProbabilities, RenormalizesMasses) {
  const auto p = LabelProbabilities::from_masses(0.06, 0.02);
  EXPECT_NEAR(p.p_aligned, 0.75, 1e-12);
  EXPECT_NEAR(p.p_misaligned, 0.25, 1e-12);
  EXPECT_THROW(LabelProbabilities::from_masses(0.0, 0.0), BackendError);
  for (double a : {1e-300, 0.3, 7.0}) {
    for (double b : {1e-9, 0.5, 123.0}) {
      const auto q = LabelProbabilities::from_masses(a, b);
      EXPECT_NEAR(q.p_aligned + q.p_misaligned, 1.0, 1e-12);
    }
  }
}

TEST(ScriptedBackend, QuadrantMentionAndStayingGivesPointNine) {
  const auto [leaver, stayer] = leaver_and_stayer();
  const auto labels = env::labels(EnvKind::AppleFarm);
  auto c = opened(EnvKind::AppleFarm);
  c.append(critique(leaver, 0, phrasing::statement(EnvKind::AppleFarm, "it left its own quadrant", labels.misaligned), 1));
  ASSERT_NE(phrasing::to_lower(c.turns()[1].text).find("quadrant"), std::string::npos);
  ScriptedBackend b;
  const auto desc = env::description(EnvKind::AppleFarm);
  const auto p = b.query_label_probs(desc, c, stayer.encoded, labels);
  EXPECT_DOUBLE_EQ(p.p_aligned, 0.9);
  const auto q = b.query_label_probs(desc, c, leaver.encoded, labels);
  EXPECT_DOUBLE_EQ(q.p_aligned, 0.1);
  const auto again = b.query_label_probs(desc, c, stayer.encoded, labels);
  EXPECT_EQ(again.p_aligned, p.p_aligned);
  EXPECT_EQ(again.p_misaligned, p.p_misaligned);
}

TEST(ScriptedBackend, OutputsSumToOne) {
  ScriptedBackend b;
  const auto pool = env::make_pool(EnvKind::MoralMachine, 62, 40);
  const auto labels = env::labels(EnvKind::MoralMachine);
  auto c = opened(EnvKind::MoralMachine);
  c.append(critique(pool[0], 1, "I can't decide.", 1));
  for (const auto& s : pool) {
    const auto p = b.query_label_probs(env::description(EnvKind::MoralMachine), c, s.encoded, labels);
    EXPECT_NEAR(p.p_aligned + p.p_misaligned, 1.0, 1e-12);
    EXPECT_GE(p.p_aligned, 0.0);
    EXPECT_LE(p.p_aligned, 1.0);
  }
}

TEST(ScriptedBackend, HypothesisFromQuadrantOnlyFeedback) {
  const auto [leaver, stayer] = leaver_and_stayer();
  const auto labels = env::labels(EnvKind::AppleFarm);
  FeedbackItem f;
  f.item_id = leaver.id;
  f.encoded = leaver.encoded;
  f.label = 0;
  f.explanation = phrasing::statement(EnvKind::AppleFarm, "it left its own quadrant", labels.misaligned);
  ScriptedBackend b;
  const auto h = b.generate_hypothesis(env::description(EnvKind::AppleFarm), {f});
  EXPECT_EQ(h.features, std::vector<std::string>{"steps-outside-own-quadrant"});
  EXPECT_EQ(h.alternatives, (std::vector<std::string>{"apples-picked-own", "apples-picked-others"}));
  EXPECT_FALSE(h.prose.empty());
}

TEST(ScriptedBackend, EmptyFeedbackIsRejected) {
  ScriptedBackend b;
  EXPECT_THROW(b.generate_hypothesis(env::description(EnvKind::AppleFarm), {}), ValidationError);
}

TEST(ScriptedBackend, ListsAreNeverEmpty) {
  ScriptedBackend b;
  const auto pool = env::make_pool(EnvKind::MoralMachine, 63, 5);
  std::vector<FeedbackItem> fb;
  for (const auto& s : pool) {
    fb.push_back({s.id, s.encoded, 1, "I just think so."});
  }
  const auto h = b.generate_hypothesis(env::description(EnvKind::MoralMachine), fb);
  EXPECT_FALSE(h.features.empty());
  EXPECT_FALSE(h.alternatives.empty());
}

TEST(MatchLabels, LongestPrefixPerLabel) {
  const LabelPair labels{"respectful", "disrespectful"};
  const auto p = match_labels({{" res", std::log(0.01)}, {"respect", std::log(0.06)}, {"dis", std::log(0.02)},
                               {"the", std::log(0.5)}},
                              labels);
  ASSERT_TRUE(p.has_value());
  EXPECT_NEAR(p->p_aligned, 0.75, 1e-12);
  EXPECT_EQ(p->raw.size(), 4u);
  EXPECT_FALSE(match_labels({{"the", -0.1}, {"a", -2.0}}, labels).has_value());
}

TEST(MatchLabels, CaseInsensitiveAndOneSided) {
  const LabelPair labels{"acceptable", "unacceptable"};
  const auto p = match_labels({{"Accept", -0.2}}, labels);
  ASSERT_TRUE(p.has_value());
  EXPECT_DOUBLE_EQ(p->p_aligned, 1.0);
}

TEST(ParseHypothesis, BulletLists) {
  const auto h = parse_hypothesis("Sure.\nFeatures:\n- staying home\n* picking apples\n\nAlternatives:\n- garbage\n");
  ASSERT_TRUE(h.has_value());
  EXPECT_EQ(h->features, (std::vector<std::string>{"staying home", "picking apples"}));
  EXPECT_EQ(h->alternatives, std::vector<std::string>{"garbage"});
  EXPECT_FALSE(parse_hypothesis("Features:\n- only one list\n").has_value());
}

TEST(MakeBackend, UnknownKindIsConfigError) {
  EXPECT_THROW(make_backend("gpt"), ConfigError);
  EXPECT_EQ(make_backend("scripted")->name(), "scripted");
}

namespace {

// Chat-completions stand-in that replays hand-written replies in order.
class MockEndpoint {
public:
  explicit MockEndpoint(std::deque<std::pair<int, std::string>> replies) : replies_(std::move(replies)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex_);
      bodies_.push_back(nlohmann::json::parse(req.body));
      if (replies_.empty()) {
        res.status = 500;
        return;
      }
      auto [status, body] = replies_.front();
      replies_.pop_front();
      res.status = status;
      res.set_content(body, "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockEndpoint() {
    server_.stop();
    thread_.join();
  }

  HttpConfig config() const {
    HttpConfig c;
    c.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1";
    c.backoff = std::chrono::milliseconds(1);
    c.timeout = std::chrono::seconds(5);
    return c;
  }
  std::vector<nlohmann::json> bodies() {
    std::lock_guard lock(mutex_);
    return bodies_;
  }

private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mutex_;
  std::deque<std::pair<int, std::string>> replies_;
  std::vector<nlohmann::json> bodies_;
};

std::string logprob_reply(const std::vector<std::pair<std::string, double>>& top) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& [t, lp] : top) {
    list.push_back({{"token", t}, {"logprob", lp}, {"bytes", nullptr}});
  }
  nlohmann::json reply{{"id", "cmpl-1"},
                       {"object", "chat.completion"},
                       {"choices",
                        {{{"index", 0},
                          {"message", {{"role", "assistant"}, {"content", top.front().first}}},
                          {"logprobs", {{"content", {{{"token", top.front().first},
                                                      {"logprob", top.front().second},
                                                      {"top_logprobs", list}}}}}},
                          {"finish_reason", "length"}}}}};
  return reply.dump();
}

std::string text_reply(const std::string& content) {
  nlohmann::json reply{{"id", "cmpl-2"},
                       {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}}}};
  return reply.dump();
}

LabelProbabilities ask(HttpBackend& b) {
  auto c = opened(EnvKind::AppleFarm);
  return b.query_label_probs(env::description(EnvKind::AppleFarm), c, "step 0: start", env::labels(EnvKind::AppleFarm));
}

} // namespace

TEST(HttpBackend, ParsesTopLogprobs) {
  const auto labels = env::labels(EnvKind::AppleFarm);
  MockEndpoint mock({{200, logprob_reply({{labels.aligned, std::log(0.06)}, {labels.misaligned, std::log(0.02)}})}});
  HttpBackend b(mock.config());
  const auto p = ask(b);
  EXPECT_NEAR(p.p_aligned, 0.75, 1e-9);
  const auto bodies = mock.bodies();
  ASSERT_EQ(bodies.size(), 1u);
  EXPECT_EQ(bodies[0]["logprobs"], true);
  EXPECT_EQ(bodies[0]["messages"][0]["role"], "system");
}

TEST(HttpBackend, RetriesTransientFailures) {
  const auto labels = env::labels(EnvKind::AppleFarm);
  MockEndpoint mock({{503, "{}"}, {429, "{}"}, {200, logprob_reply({{labels.misaligned, -0.1}})}});
  HttpBackend b(mock.config());
  EXPECT_DOUBLE_EQ(ask(b).p_misaligned, 1.0);
  EXPECT_EQ(b.requests_sent(), 3);
}

TEST(HttpBackend, GivesUpAfterThreeAttempts) {
  MockEndpoint mock({{500, "{}"}, {500, "{}"}, {500, "{}"}, {500, "{}"}});
  HttpBackend b(mock.config());
  EXPECT_THROW(ask(b), BackendError);
  EXPECT_EQ(b.requests_sent(), 3);
}

TEST(HttpBackend, ClientErrorIsNotRetried) {
  MockEndpoint mock({{400, R"({"error":"bad"})"}});
  HttpBackend b(mock.config());
  EXPECT_THROW(ask(b), BackendError);
  EXPECT_EQ(b.requests_sent(), 1);
}

TEST(HttpBackend, UnmatchedLabelsTriggerOneConstrainedRequery) {
  const auto labels = env::labels(EnvKind::AppleFarm);
  MockEndpoint mock({{200, logprob_reply({{"The", -0.1}, {"I", -2.0}})},
                     {200, logprob_reply({{labels.aligned, std::log(0.3)}, {labels.misaligned, std::log(0.1)}})}});
  HttpBackend b(mock.config());
  EXPECT_NEAR(ask(b).p_aligned, 0.75, 1e-9);
  const auto bodies = mock.bodies();
  ASSERT_EQ(bodies.size(), 2u);
  EXPECT_EQ(bodies[1]["messages"].size(), bodies[0]["messages"].size() + 1);
}

TEST(HttpBackend, StillUnmatchedIsBackendError) {
  MockEndpoint mock({{200, logprob_reply({{"The", -0.1}})}, {200, logprob_reply({{"Maybe", -0.1}})}});
  HttpBackend b(mock.config());
  EXPECT_THROW(ask(b), BackendError);
}

TEST(HttpBackend, HypothesisReprompt) {
  MockEndpoint mock({{200, text_reply("I think they like apples.")},
                     {200, text_reply("Features:\n- stays in its own quadrant\nAlternatives:\n- garbage collected\n- "
                                      "idle steps")}});
  HttpBackend b(mock.config());
  const auto pool = env::make_pool(EnvKind::AppleFarm, 64, 1);
  const auto h = b.generate_hypothesis(env::description(EnvKind::AppleFarm),
                                       {{pool[0].id, pool[0].encoded, 1, "It stayed home."}});
  EXPECT_EQ(h.features, std::vector<std::string>{"stays in its own quadrant"});
  EXPECT_EQ(h.alternatives, (std::vector<std::string>{"garbage collected", "idle steps"}));
  EXPECT_EQ(mock.bodies().size(), 2u);
}

TEST(HttpBackend, HypothesisUnparseableTwiceIsBackendError) {
  MockEndpoint mock({{200, text_reply("no lists")}, {200, text_reply("still none")}});
  HttpBackend b(mock.config());
  const auto pool = env::make_pool(EnvKind::AppleFarm, 64, 1);
  EXPECT_THROW(b.generate_hypothesis(env::description(EnvKind::AppleFarm),
                                     {{pool[0].id, pool[0].encoded, 1, "It stayed home."}}),
               BackendError);
}

TEST(HttpBackend, MissingSchemeIsConfigError) {
  HttpConfig c;
  c.base_url = "localhost:8000";
  EXPECT_THROW(HttpBackend{c}, ConfigError);
}
