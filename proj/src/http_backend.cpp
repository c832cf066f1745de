#include "irda/http_backend.hpp"

#include "irda/scripted_backend.hpp"

#include <httplib.h>

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

namespace irda::llm {

namespace {

std::string lower_trimmed(const std::string& token) {
  std::size_t start = 0;
  while (start < token.size() && (std::isspace(static_cast<unsigned char>(token[start])) || token[start] == '"' ||
                                  token[start] == '\'')) {
    ++start;
  }
  std::string out = token.substr(start);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.size() >= prefix.size() && s.compare(0, prefix.size(), prefix) == 0;
}

std::string feedback_block(const std::vector<FeedbackItem>& feedback) {
  std::ostringstream out;
  for (std::size_t i = 0; i < feedback.size(); ++i) {
    out << "Example " << (i + 1) << ":\n" << feedback[i].encoded << "\nLabel: " << feedback[i].label
        << "\nExplanation: " << feedback[i].explanation << "\n\n";
  }
  return out.str();
}

constexpr std::string_view kHypothesisFormat =
    "Reply in exactly this format:\nFeatures:\n- <feature the user relies on>\nAlternatives:\n- <feature the user "
    "might also care about>";

} // namespace

HttpConfig HttpConfig::from_env() {
  HttpConfig c;
  const char* url = std::getenv("IRDA_LLM_URL");
  if (url == nullptr || *url == '\0') {
    throw ConfigError("IRDA_LLM_URL is not set");
  }
  c.base_url = url;
  if (const char* model = std::getenv("IRDA_LLM_MODEL"); model != nullptr && *model != '\0') {
    c.model = model;
  }
  if (const char* key = std::getenv("IRDA_LLM_KEY"); key != nullptr) {
    c.api_key = key;
  }
  return c;
}

std::optional<LabelProbabilities> match_labels(const std::vector<std::pair<std::string, double>>& top_logprobs,
                                               const LabelPair& labels) {
  const std::string a = lower_trimmed(labels.aligned);
  const std::string b = lower_trimmed(labels.misaligned);
  struct Best {
    std::size_t length = 0;
    double logprob = -INFINITY;
  };
  Best best_a;
  Best best_b;
  LabelProbabilities out;
  for (const auto& [token, logprob] : top_logprobs) {
    out.raw[token] = logprob;
    const std::string t = lower_trimmed(token);
    if (t.empty()) {
      continue;
    }
    const bool for_a = starts_with(a, t);
    const bool for_b = starts_with(b, t);
    if (for_a == for_b) {
      continue;
    }
    Best& best = for_a ? best_a : best_b;
    if (t.size() > best.length || (t.size() == best.length && logprob > best.logprob)) {
      best = Best{t.size(), logprob};
    }
  }
  if (best_a.length == 0 && best_b.length == 0) {
    return std::nullopt;
  }
  const double ma = best_a.length > 0 ? std::exp(best_a.logprob) : 0.0;
  const double mb = best_b.length > 0 ? std::exp(best_b.logprob) : 0.0;
  auto p = LabelProbabilities::from_masses(ma, mb);
  p.raw = std::move(out.raw);
  return p;
}

std::optional<Hypothesis> parse_hypothesis(const std::string& text) {
  Hypothesis h;
  std::vector<std::string>* target = nullptr;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
      continue;
    }
    std::string body = line.substr(first);
    while (!body.empty() && (body.back() == '\r' || body.back() == ' ')) {
      body.pop_back();
    }
    std::string lower = body;
    for (char& c : lower) {
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    if (starts_with(lower, "features:")) {
      target = &h.features;
      continue;
    }
    if (starts_with(lower, "alternatives:")) {
      target = &h.alternatives;
      continue;
    }
    if (target != nullptr && (body[0] == '-' || body[0] == '*')) {
      const auto start = body.find_first_not_of(" \t", 1);
      if (start != std::string::npos) {
        target->push_back(body.substr(start));
      }
    }
  }
  if (h.features.empty() || h.alternatives.empty()) {
    return std::nullopt;
  }
  h.prose = text;
  return h;
}

HttpBackend::HttpBackend(HttpConfig config) : config_(std::move(config)) {
  const auto scheme = config_.base_url.find("://");
  if (scheme == std::string::npos) {
    throw ConfigError("LLM base URL must include a scheme: " + config_.base_url);
  }
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (config_.base_url.compare(0, scheme, "https") == 0) {
    throw ConfigError("this build has no TLS support; use an http:// LLM endpoint");
  }
#endif
  const auto path = config_.base_url.find('/', scheme + 3);
  host_ = config_.base_url.substr(0, path);
  path_prefix_ = path == std::string::npos ? "" : config_.base_url.substr(path);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') {
    path_prefix_.pop_back();
  }
  if (config_.attempts < 1) {
    throw ConfigError("attempts must be at least 1");
  }
}

long HttpBackend::requests_sent() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

void HttpBackend::throttle() {
  if (config_.requests_per_second <= 0.0) {
    return;
  }
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_slot_);
    next_slot_ = slot + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(1.0 / config_.requests_per_second));
  }
  std::this_thread::sleep_until(slot);
}

nlohmann::json HttpBackend::post(const nlohmann::json& body) {
  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt < config_.attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(config_.backoff * (1 << (attempt - 1)));
    }
    throttle();
    httplib::Client client(host_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + config_.api_key);
    }
    {
      std::lock_guard lock(mutex_);
      ++requests_;
    }
    auto res = client.Post(path_prefix_ + "/chat/completions", headers, body.dump(), "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw BackendError("LLM endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw BackendError(std::string("LLM endpoint returned invalid JSON: ") + e.what());
    }
  }
  throw BackendError("LLM endpoint failed after " + std::to_string(config_.attempts) + " attempts (" + last_error +
                     ")");
}

LabelProbabilities HttpBackend::query_label_probs(const std::string& env_desc, const Conversation& c,
                                                  const std::string& encoded, const LabelPair& labels) {
  nlohmann::json messages = nlohmann::json::array();
  if (c.empty()) {
    messages.push_back({{"role", "system"}, {"content", env_desc}});
  }
  for (const auto& t : c.turns()) {
    messages.push_back({{"role", std::string(to_string(t.role))}, {"content", render_turn(t, labels)}});
  }
  messages.push_back({{"role", "user"},
                      {"content", "New example:\n" + encoded + "\nAnswer with exactly one word: " + labels.aligned +
                                      " or " + labels.misaligned + "."}});

  auto ask = [&](const nlohmann::json& msgs) {
    nlohmann::json body{{"model", config_.model},      {"messages", msgs},
                        {"max_tokens", 1},             {"temperature", 0},
                        {"logprobs", true},            {"top_logprobs", config_.top_logprobs}};
    const auto reply = post(body);
    std::vector<std::pair<std::string, double>> top;
    try {
      for (const auto& entry : reply.at("choices").at(0).at("logprobs").at("content").at(0).at("top_logprobs")) {
        top.emplace_back(entry.at("token").get<std::string>(), entry.at("logprob").get<double>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("LLM reply lacks top_logprobs: ") + e.what());
    }
    return match_labels(top, labels);
  };

  if (auto p = ask(messages)) {
    return *p;
  }
  messages.push_back({{"role", "user"},
                      {"content", "Reply with exactly one of these two words and nothing else: " + labels.aligned +
                                      ", " + labels.misaligned + "."}});
  if (auto p = ask(messages)) {
    return *p;
  }
  throw BackendError("neither label appeared among the top tokens, even after a constrained re-query");
}

Hypothesis HttpBackend::generate_hypothesis(const std::string& env_desc, const std::vector<FeedbackItem>& feedback) {
  if (feedback.empty()) {
    throw ValidationError("a hypothesis needs at least one feedback item");
  }
  nlohmann::json messages = nlohmann::json::array();
  messages.push_back({{"role", "system"}, {"content", env_desc}});
  messages.push_back({{"role", "user"},
                      {"content", "Here is feedback a user gave on several examples.\n\n" + feedback_block(feedback) +
                                      "Which features of the examples is the user relying on, and which other "
                                      "features might they want to consider?\n" +
                                      std::string(kHypothesisFormat)}});
  for (int round = 0; round < 2; ++round) {
    nlohmann::json body{{"model", config_.model}, {"messages", messages}, {"temperature", 0}, {"max_tokens", 400}};
    const auto reply = post(body);
    std::string text;
    try {
      text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("LLM reply lacks message content: ") + e.what());
    }
    if (auto h = parse_hypothesis(text)) {
      return *h;
    }
    messages.push_back({{"role", "assistant"}, {"content", text}});
    messages.push_back({{"role", "user"}, {"content", "That did not follow the format. " + std::string(kHypothesisFormat)}});
  }
  throw BackendError("could not parse a hypothesis from the LLM reply");
}

std::shared_ptr<Backend> make_backend(const std::string& kind) {
  if (kind == "scripted") {
    return std::make_shared<ScriptedBackend>();
  }
  if (kind == "http") {
    return std::make_shared<HttpBackend>(HttpConfig::from_env());
  }
  throw ConfigError("unknown backend '" + kind + "' (expected scripted or http)");
}

} // namespace irda::llm
