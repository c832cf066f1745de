#include "irda/server.hpp"

#include "irda/environment.hpp"

#include <httplib.h>

#include <fstream>
#include <iostream>
#include <random>

namespace irda::service {

namespace fs = std::filesystem;

std::vector<nlohmann::json> read_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw NotFoundError("cannot open " + path.string());
  }
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) {
      lines.push_back(line);
    }
  }
  std::vector<nlohmann::json> events;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      events.push_back(nlohmann::json::parse(lines[i]));
    } catch (const nlohmann::json::parse_error&) {
      if (i + 1 == lines.size()) {
        break;
      }
      throw ValidationError(path.string() + ": malformed event on line " + std::to_string(i + 1));
    }
  }
  return events;
}

SessionStore::SessionStore(fs::path data_dir) : dir_(std::move(data_dir) / "sessions") {
  fs::create_directories(dir_);
  std::vector<fs::path> logs;
  for (const auto& entry : fs::directory_iterator(dir_)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
      logs.push_back(entry.path());
    }
  }
  std::sort(logs.begin(), logs.end());
  for (const auto& path : logs) {
    const std::string id = path.stem().string();
    try {
      auto events = read_log(path);
      // Rewrite a log whose torn tail was dropped so appends stay well-formed.
      auto session = loop::Session::replay(events, sink_for(id));
      if (session.id() != id) {
        throw ValidationError("log name does not match session id " + session.id());
      }
      std::ofstream out(path, std::ios::trunc);
      for (const auto& e : events) {
        out << e.dump() << '\n';
      }
      sessions_.emplace(id, std::make_shared<Entry>(std::move(session)));
    } catch (const std::exception& e) {
      std::cerr << "skipping session log " << path << ": " << e.what() << '\n';
      skipped_.push_back(id);
    }
  }
}

fs::path SessionStore::log_path(const std::string& id) const {
  return dir_ / (id + ".jsonl");
}

loop::EventSink SessionStore::sink_for(const std::string& id) const {
  return [path = log_path(id)](const nlohmann::json& event) {
    std::ofstream out(path, std::ios::app);
    out << event.dump() << '\n';
    out.flush();
    if (!out) {
      throw std::runtime_error("cannot append to " + path.string());
    }
  };
}

std::string SessionStore::create(const nlohmann::json& config) {
  nlohmann::json body = config.is_null() ? nlohmann::json::object() : config;
  if (!body.is_object()) {
    throw ValidationError("session config must be a JSON object");
  }
  std::unique_lock lock(mutex_);
  if (!body.contains("id")) {
    static std::mt19937_64 rng{std::random_device{}()};
    std::string id;
    do {
      char buf[17];
      std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(rng()));
      id = std::string("s") + buf;
    } while (sessions_.contains(id) || fs::exists(log_path(id)));
    body["id"] = id;
  }
  auto cfg = loop::config_from_json(body);
  if (sessions_.contains(cfg.id) || fs::exists(log_path(cfg.id))) {
    throw PhaseError("session " + cfg.id + " already exists");
  }
  auto session = loop::Session::create(cfg, sink_for(cfg.id));
  sessions_.emplace(cfg.id, std::make_shared<Entry>(std::move(session)));
  return cfg.id;
}

std::shared_ptr<SessionStore::Entry> SessionStore::find(const std::string& id) const {
  std::shared_lock lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) {
    throw NotFoundError("no session " + id);
  }
  return it->second;
}

std::vector<std::string> SessionStore::ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, entry] : sessions_) {
    out.push_back(id);
  }
  return out;
}

// --- HTTP -----------------------------------------------------------------

namespace {

void reply(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  reply(res, status, nlohmann::json{{"code", code}, {"message", message}});
}

nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) {
    return nlohmann::json::object();
  }
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("request body is not valid JSON: ") + e.what());
  }
}

int parse_label(const nlohmann::json& v, const LabelPair& labels) {
  if (v.is_number_integer()) {
    return v.get<int>();
  }
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == labels.aligned) {
      return 1;
    }
    if (s == labels.misaligned) {
      return 0;
    }
  }
  throw ValidationError("label must be 0, 1, '" + labels.aligned + "' or '" + labels.misaligned + "'");
}

} // namespace

struct Service::Impl {
  ServiceOptions options;
  SessionStore store;
  httplib::Server server;

  explicit Impl(ServiceOptions o) : options(std::move(o)), store(options.data_dir) {
    if (!options.backend) {
      throw ConfigError("the service needs an LLM backend");
    }
    routes();
  }

  template <typename Fn>
  httplib::Server::Handler guarded(Fn fn) {
    return [this, fn](const httplib::Request& req, httplib::Response& res) {
      try {
        if (!options.api_token.empty() && req.get_header_value("Authorization") != "Bearer " + options.api_token) {
          error(res, 401, "unauthorized", "missing or wrong API token");
          return;
        }
        fn(req, res);
      } catch (const NotFoundError& e) {
        error(res, 404, "not_found", e.what());
      } catch (const PhaseError& e) {
        error(res, 409, "phase_conflict", e.what());
      } catch (const ValidationError& e) {
        error(res, 400, "validation_error", e.what());
      } catch (const ConfigError& e) {
        error(res, 400, "config_error", e.what());
      } catch (const BackendError& e) {
        error(res, 502, "backend_error", e.what());
      } catch (const nlohmann::json::exception& e) {
        error(res, 400, "validation_error", e.what());
      } catch (const std::exception& e) {
        error(res, 500, "internal_error", e.what());
      }
    };
  }

  void routes() {
    server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200,
            {{"status", "ok"}, {"backend", options.backend->name()}, {"sessions", store.ids().size()}});
    });

    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto id = store.create(parse_body(req));
      reply(res, 201, store.with(id, [](loop::Session& s) { return s.state_json(); }));
    }));

    server.Get("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, {{"sessions", store.ids()}});
    }));

    server.Get(R"(/sessions/([A-Za-z0-9_-]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      reply(res, 200, store.with(req.matches[1], [](loop::Session& s) { return s.state_json(); }));
    }));

    server.Get(R"(/sessions/([A-Za-z0-9_-]+)/next)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 reply(res, 200, store.with(req.matches[1], [this](loop::Session& s) {
                   auto j = loop::to_json(s.next(*options.backend));
                   j["phase"] = std::string(loop::to_string(s.phase()));
                   return j;
                 }));
               }));

    server.Post(R"(/sessions/([A-Za-z0-9_-]+)/feedback)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto body = parse_body(req);
                  reply(res, 200, store.with(req.matches[1], [&](loop::Session& s) {
                    if (body.contains("response")) {
                      s.submit_response(body.at("response").get<std::string>(), body.value("stable", false));
                    } else {
                      if (!body.contains("item_id") || !body.contains("label") || !body.contains("explanation")) {
                        throw ValidationError("feedback needs item_id, label and explanation (or response)");
                      }
                      s.submit_feedback(body.at("item_id").get<std::string>(),
                                        parse_label(body.at("label"), env::labels(s.config().env)),
                                        body.at("explanation").get<std::string>());
                    }
                    return nlohmann::json{{"phase", std::string(loop::to_string(s.phase()))},
                                          {"events", s.events().size()}};
                  }));
                }));

    server.Post(R"(/sessions/([A-Za-z0-9_-]+)/labels)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto body = parse_body(req);
                  reply(res, 200, store.with(req.matches[1], [&](loop::Session& s) {
                    const auto& raw = body.contains("labels") ? body.at("labels") : body;
                    if (!raw.is_object()) {
                      throw ValidationError("labels must be an object mapping item ids to labels");
                    }
                    std::map<std::string, int> labels;
                    for (const auto& [id, v] : raw.items()) {
                      labels[id] = parse_label(v, env::labels(s.config().env));
                    }
                    s.submit_labels(labels);
                    return nlohmann::json{{"phase", std::string(loop::to_string(s.phase()))},
                                          {"labels", labels.size()}};
                  }));
                }));

    server.Post(R"(/sessions/([A-Za-z0-9_-]+)/evaluate)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto body = parse_body(req);
                  const std::string metric = body.value("metric", options.default_metric);
                  reply(res, 200, store.with(req.matches[1], [&](loop::Session& s) {
                    return s.evaluate(*options.backend, metric);
                  }));
                }));
  }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Service::~Service() {
  stop();
}

int Service::bind_to_any_port(const std::string& host) {
  return impl_->server.bind_to_any_port(host);
}

bool Service::listen_after_bind() {
  return impl_->server.listen_after_bind();
}

bool Service::listen(const std::string& host, int port) {
  return impl_->server.listen(host, port);
}

void Service::stop() {
  if (impl_) {
    impl_->server.stop();
  }
}

void Service::wait_until_ready() const {
  impl_->server.wait_until_ready();
}

SessionStore& Service::store() {
  return impl_->store;
}

} // namespace irda::service
