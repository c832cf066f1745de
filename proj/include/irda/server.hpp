#pragma once

#include "irda/llm.hpp"
#include "irda/session.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

// HTTP/JSON service for interactive sessions. Each session persists as a
// JSON-lines event log under <data_dir>/sessions/<id>.jsonl and is rebuilt
// from it on startup.
namespace irda::service {

class SessionStore {
public:
  /// Replays every log found under data_dir/sessions. Logs that fail to
  /// replay are skipped and listed in `skipped()`.
  explicit SessionStore(std::filesystem::path data_dir);

  /// Creates a session from a config object; an absent id gets a fresh one.
  std::string create(const nlohmann::json& config);

  /// Runs `fn` with the session locked. Throws NotFoundError for unknown ids.
  template <typename Fn>
  auto with(const std::string& id, Fn&& fn) {
    auto entry = find(id);
    std::lock_guard lock(entry->mutex);
    return fn(entry->session);
  }

  std::vector<std::string> ids() const;
  const std::vector<std::string>& skipped() const { return skipped_; }
  std::filesystem::path log_path(const std::string& id) const;

private:
  struct Entry {
    explicit Entry(loop::Session s) : session(std::move(s)) {}
    std::mutex mutex;
    loop::Session session;
  };

  std::shared_ptr<Entry> find(const std::string& id) const;
  loop::EventSink sink_for(const std::string& id) const;

  std::filesystem::path dir_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::vector<std::string> skipped_;
};

/// Reads a JSON-lines event log. A torn final line (crash mid-write) is dropped.
std::vector<nlohmann::json> read_log(const std::filesystem::path& path);

struct ServiceOptions {
  std::filesystem::path data_dir = "irda-data";
  std::shared_ptr<llm::Backend> backend;
  /// When set, every route but /health requires "Authorization: Bearer <token>".
  std::string api_token;
  std::string default_metric = "balanced_accuracy";
};

class Service {
public:
  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds to an ephemeral port and returns it; follow with listen_after_bind().
  int bind_to_any_port(const std::string& host = "127.0.0.1");
  bool listen_after_bind();
  bool listen(const std::string& host, int port);
  void stop();
  void wait_until_ready() const;

  SessionStore& store();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

} // namespace irda::service
