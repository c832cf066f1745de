#include "irda/applefarm.hpp"
#include "irda/environment.hpp"
#include "irda/features.hpp"
#include "irda/http_backend.hpp"
#include "irda/moralmachine.hpp"
#include "irda/sampling.hpp"
#include "irda/server.hpp"
#include "irda/stats.hpp"
#include "irda/study.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>

using namespace irda;

namespace {

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open " + path);
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// Writes to `path`, or stdout when it is empty.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out << text;
}

std::string predictions_csv(const nlohmann::json& evaluation) {
  std::ostringstream out;
  out << "id,truth,prediction,p_aligned\n";
  for (const auto& item : evaluation.at("items")) {
    out << item.at("id").get<std::string>() << ',' << item.at("truth").get<int>() << ','
        << item.at("prediction").get<int>() << ',' << item.at("p_aligned").get<double>() << '\n';
  }
  return out.str();
}

service::Service* g_service = nullptr;

void on_signal(int) {
  if (g_service != nullptr) {
    g_service->stop();
  }
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Individualized verbal reward models built through reflective dialogue"};
  app.require_subcommand(1);
  std::uint64_t seed = 1;

  // gen-pool
  auto* gen = app.add_subcommand("gen-pool", "Generate a stimulus pool");
  std::string env_name = "applefarm";
  int count = 40;
  std::string format = "jsonl";
  std::string out_path;
  std::string behavior_mix;
  gen->add_option("--env", env_name, "applefarm or moralmachine")->capture_default_str();
  gen->add_option("--seed", seed, "Pool seed")->capture_default_str();
  gen->add_option("--count", count, "Number of stimuli")->capture_default_str();
  gen->add_option("--format", format, "jsonl, ascii or features")
      ->check(CLI::IsMember({"jsonl", "ascii", "features"}))
      ->capture_default_str();
  gen->add_option("--behavior-mix", behavior_mix, "Apple farm profile weights, e.g. greedy=2,hermit=1");
  gen->add_option("--out", out_path, "Output file (default stdout)");

  // cluster
  auto* cluster = app.add_subcommand("cluster", "Cluster a pool and pick representatives");
  std::uint64_t pool_seed = 101;
  int k = 4;
  cluster->add_option("--env", env_name)->capture_default_str();
  cluster->add_option("--pool-seed", pool_seed, "Seed of the pool to cluster")->capture_default_str();
  cluster->add_option("--count", count)->capture_default_str();
  cluster->add_option("--k", k, "Number of clusters")->capture_default_str();
  cluster->add_option("--seed", seed, "Clustering seed")->capture_default_str();
  cluster->add_option("--behavior-mix", behavior_mix);
  cluster->add_option("--out", out_path);

  // run
  auto* run = app.add_subcommand("run", "Run a simulated study from a manifest");
  std::string manifest_path;
  std::string curves_csv;
  bool quiet = false;
  std::optional<std::uint64_t> seed_override;
  run->add_option("--manifest", manifest_path, "Experiment manifest (JSON)")->required();
  run->add_option("--seed", seed_override, "Override the manifest seed");
  run->add_option("--out", out_path, "Report file (default stdout)");
  run->add_option("--curves-csv", curves_csv, "Write MLP curves as CSV");
  run->add_flag("--quiet", quiet, "No progress on stderr");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Evaluate a recorded session");
  std::string log_path;
  std::string metric = "balanced_accuracy";
  std::string backend_kind = "scripted";
  std::string csv_prefix;
  eval->add_option("--log", log_path, "Session event log (.jsonl)")->required();
  eval->add_option("--metric", metric)->capture_default_str();
  eval->add_option("--backend", backend_kind, "scripted or http")->capture_default_str();
  eval->add_option("--csv", csv_prefix, "Write <prefix>-irda.csv and <prefix>-baseline.csv");
  eval->add_option("--seed", seed, "Unused; accepted for uniformity");
  eval->add_option("--out", out_path);

  // stats
  auto* st = app.add_subcommand("stats", "Agreement, overlap and paired tests on a JSON input");
  std::string input_path;
  int resamples = stats::kDefaultResamples;
  st->add_option("--input", input_path,
                 "JSON with any of: ratings (items x raters), sets (lists), a and b (paired values), values")
      ->required();
  st->add_option("--resamples", resamples)->capture_default_str();
  st->add_option("--seed", seed, "Bootstrap seed")->capture_default_str();
  st->add_option("--out", out_path);

  // serve
  auto* serve = app.add_subcommand("serve", "Serve the session API");
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir = "irda-data";
  std::string token;
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--data-dir", data_dir, "Where session logs live")->capture_default_str();
  serve->add_option("--backend", backend_kind, "scripted or http")->capture_default_str();
  serve->add_option("--token", token, "Require this bearer token (or set IRDA_API_TOKEN)");
  serve->add_option("--seed", seed, "Unused; accepted for uniformity");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      const EnvKind env = env_from_string(env_name);
      if (count < 1) {
        throw ConfigError("--count must be positive");
      }
      std::ostringstream out;
      if (format == "features") {
        const auto pool = env::make_pool(env, seed, count, behavior_mix);
        std::vector<std::string> ids;
        std::vector<FeatureVector> rows;
        for (const auto& s : pool) {
          ids.push_back(s.id);
          rows.push_back(s.features);
        }
        features::write_csv(out, ids, rows);
      } else if (format == "ascii") {
        for (const auto& s : env::make_pool(env, seed, count, behavior_mix)) {
          out << "# " << s.id << "\n" << s.encoded << "\n";
        }
      } else if (env == EnvKind::AppleFarm) {
        const auto mix = behavior_mix.empty() ? applefarm::BehaviorMix::uniform()
                                              : applefarm::BehaviorMix::parse(behavior_mix);
        applefarm::write_jsonl(out, applefarm::generate_pool(seed, count, mix));
      } else {
        moralmachine::write_jsonl(out, moralmachine::generate_scenarios(seed, count));
      }
      emit(out_path, out.str());
    } else if (*cluster) {
      const EnvKind env = env_from_string(env_name);
      const auto pool = env::make_pool(env, pool_seed, count, behavior_mix);
      std::vector<std::string> ids;
      std::vector<FeatureVector> rows;
      for (const auto& s : pool) {
        ids.push_back(s.id);
        rows.push_back(s.features);
      }
      const auto points = features::normalize_minmax(rows);
      const auto c = sampling::kmeans(points, k, seed);
      auto j = sampling::to_json(c, ids);
      nlohmann::json reps = nlohmann::json::array();
      for (auto idx : sampling::select_representatives(c, points, ids)) {
        reps.push_back(ids[idx]);
      }
      j["representatives"] = reps;
      emit(out_path, j.dump(2) + "\n");
    } else if (*run) {
      auto manifest = study::manifest_from_json(read_json_file(manifest_path));
      if (seed_override) {
        manifest.seed = *seed_override;
      }
      auto backend = llm::make_backend(manifest.backend);
      const auto report = study::run_study(manifest, *backend, [&](const std::string& line) {
        if (!quiet) {
          std::cerr << line << '\n';
        }
      });
      emit(out_path, report.dump(2) + "\n");
      if (!curves_csv.empty() && report.contains("curves")) {
        std::ostringstream csv;
        csv << "count,mean,ci_low,ci_high,variant\n";
        for (const char* variant : {"individual", "collective"}) {
          const auto& c = report.at("curves").at(variant);
          const auto& counts = c.at("sample_counts");
          for (std::size_t i = 0; i < counts.size(); ++i) {
            const auto& b = c.at("bands").at(i);
            csv << counts.at(i).get<int>() << ',' << b.at("mean").get<double>() << ',' << b.at("low").get<double>()
                << ',' << b.at("high").get<double>() << ',' << variant << '\n';
          }
        }
        emit(curves_csv, csv.str());
      }
    } else if (*eval) {
      auto session = loop::Session::replay(service::read_log(log_path));
      auto backend = llm::make_backend(backend_kind);
      const auto report = session.evaluate(*backend, metric);
      emit(out_path, report.dump(2) + "\n");
      if (!csv_prefix.empty()) {
        emit(csv_prefix + "-irda.csv", predictions_csv(report.at("irda")));
        emit(csv_prefix + "-baseline.csv", predictions_csv(report.at("baseline")));
      }
    } else if (*st) {
      const auto in = read_json_file(input_path);
      nlohmann::json out = nlohmann::json::object();
      bool any = false;
      if (in.contains("ratings")) {
        const auto m = in.at("ratings").get<stats::LabelMatrix>();
        out["kappa"] = stats::fleiss_kappa(m);
        out["mean_pairwise_kappa"] = stats::mean_pairwise_kappa(m);
        any = true;
      }
      if (in.contains("sets")) {
        std::map<std::string, int> codes;
        std::vector<std::set<int>> sets;
        for (const auto& s : in.at("sets")) {
          std::set<int> coded;
          for (const auto& v : s) {
            const std::string key = v.is_string() ? v.get<std::string>() : v.dump();
            coded.insert(codes.emplace(key, static_cast<int>(codes.size())).first->second);
          }
          sets.push_back(coded);
        }
        const auto ci = stats::bootstrap_ci(stats::pairwise_jaccard(sets), resamples, 0.95, seed);
        out["jaccard_mean"] = stats::mean_pairwise_jaccard(sets);
        out["jaccard_ci"] = {{"low", ci.low}, {"high", ci.high}};
        any = true;
      }
      if (in.contains("a") || in.contains("b")) {
        const auto s = stats::paired_summary(in.at("a").get<std::vector<double>>(),
                                             in.at("b").get<std::vector<double>>(), resamples, seed);
        const auto j = stats::to_json(s);
        out["deltas"] = j.at("deltas");
        out["delta_ci"] = j.at("delta_ci");
        out["wilcoxon"] = j.at("wilcoxon");
        out["wilcoxon_p"] = j.at("wilcoxon_p");
        any = true;
      }
      if (in.contains("values")) {
        out["bootstrap"] =
            stats::to_json(stats::bootstrap_ci(in.at("values").get<std::vector<double>>(), resamples, 0.95, seed));
        any = true;
      }
      if (!any) {
        throw ConfigError("input has none of: ratings, sets, a/b, values");
      }
      emit(out_path, out.dump(2) + "\n");
    } else if (*serve) {
      if (token.empty()) {
        if (const char* t = std::getenv("IRDA_API_TOKEN")) {
          token = t;
        }
      }
      service::ServiceOptions options;
      options.data_dir = data_dir;
      options.backend = llm::make_backend(backend_kind);
      options.api_token = token;
      service::Service svc(std::move(options));
      g_service = &svc;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << host << ':' << port << " (" << svc.store().ids().size() << " sessions)\n";
      if (!svc.listen(host, port)) {
        g_service = nullptr;
        throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
      }
      g_service = nullptr;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
