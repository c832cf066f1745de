#pragma once

#include "irda/llm.hpp"

#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace irda::llm {

struct HttpConfig {
  std::string base_url; // e.g. http://127.0.0.1:8000/v1
  std::string model = "gpt-3.5-turbo";
  std::string api_key;
  int top_logprobs = 20;
  int attempts = 3;
  std::chrono::milliseconds backoff{200};
  std::chrono::seconds timeout{60};
  double requests_per_second = 0.0; // 0 disables the rate limiter

  /// Reads IRDA_LLM_URL (required), IRDA_LLM_MODEL and IRDA_LLM_KEY.
  static HttpConfig from_env();
};

/// Matches first-token alternatives to the two labels. A token counts for a
/// label when, lower-cased and stripped of leading blanks, it is a non-empty
/// prefix of that label; tokens that prefix both labels are ignored. Each
/// label keeps its longest matching token. nullopt when neither label matched.
std::optional<LabelProbabilities> match_labels(const std::vector<std::pair<std::string, double>>& top_logprobs,
                                               const LabelPair& labels);

/// Parses "Features:" / "Alternatives:" bullet lists. nullopt if either list is missing or empty.
std::optional<Hypothesis> parse_hypothesis(const std::string& text);

/// OpenAI-compatible chat-completions client.
class HttpBackend : public Backend {
public:
  explicit HttpBackend(HttpConfig config);

  std::string name() const override { return "http"; }
  LabelProbabilities query_label_probs(const std::string& env_desc, const Conversation& c, const std::string& encoded,
                                       const LabelPair& labels) override;
  Hypothesis generate_hypothesis(const std::string& env_desc, const std::vector<FeedbackItem>& feedback) override;

  /// Number of HTTP requests sent so far (including retries).
  long requests_sent() const;

private:
  nlohmann::json post(const nlohmann::json& body);
  void throttle();

  HttpConfig config_;
  std::string host_;
  std::string path_prefix_;
  mutable std::mutex mutex_;
  long requests_ = 0;
  std::chrono::steady_clock::time_point next_slot_{};
};

/// "scripted" or "http" (configured from the environment).
std::shared_ptr<Backend> make_backend(const std::string& kind);

} // namespace irda::llm
