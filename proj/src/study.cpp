#include "irda/study.hpp"

#include "irda/environment.hpp"
#include "irda/stats.hpp"

#include <set>

namespace irda::study {

namespace {

void reject_unknown(const nlohmann::json& j, const std::string& where, std::initializer_list<const char*> known) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) {
      ok = ok || key == k;
    }
    if (!ok) {
      throw ConfigError("unknown field '" + where + key + "'");
    }
  }
}

template <typename T>
T field(const nlohmann::json& j, const std::string& where, const char* key, T fallback) {
  if (!j.contains(key)) {
    return fallback;
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("field '" + where + key + "' has the wrong type");
  }
}

const nlohmann::json& object_field(const nlohmann::json& j, const std::string& where, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_object()) {
    throw ConfigError("field '" + where + key + "' must be an object");
  }
  return v;
}

loop::PoolSpec pool_field(const nlohmann::json& pools, const char* key, loop::PoolSpec fallback, bool with_size) {
  if (!pools.contains(key)) {
    return fallback;
  }
  const std::string where = std::string("pools.") + key + ".";
  const auto& p = object_field(pools, "pools.", key);
  if (with_size) {
    reject_unknown(p, where, {"seed", "size"});
  } else {
    reject_unknown(p, where, {"seed"});
  }
  fallback.seed = field<std::uint64_t>(p, where, "seed", fallback.seed);
  fallback.size = field<int>(p, where, "size", fallback.size);
  return fallback;
}

nlohmann::json summary(const std::vector<double>& values, int resamples, std::uint64_t seed) {
  const auto ci = stats::bootstrap_ci(values, resamples, 0.95, seed);
  return nlohmann::json{{"mean", ci.mean}, {"ci", {{"low", ci.low}, {"high", ci.high}}}, {"values", values}};
}

} // namespace

loop::SessionConfig Manifest::session_config(const std::string& id) const {
  loop::SessionConfig c = loop::SessionConfig::defaults_for(env);
  c.id = id;
  if (!value_concept.empty()) {
    c.value_concept = value_concept;
  }
  c.seed = seed;
  c.k = k;
  c.epsilon = epsilon;
  c.budget = budget;
  c.diversity = diversity;
  c.uncertainty = uncertainty;
  c.test = loop::PoolSpec{test_seed, test_size};
  c.behavior_mix = behavior_mix;
  c.context_budget = context_budget;
  return c;
}

void Manifest::validate() const {
  if (!interactive && users < 2) {
    throw ConfigError("population.users: a simulated study needs at least 2 users");
  }
  if (test_size < 1) {
    throw ConfigError("test_size: must be positive");
  }
  if (bootstrap_resamples < 1) {
    throw ConfigError("bootstrap_resamples: must be positive");
  }
  if (backend != "scripted" && backend != "http") {
    throw ConfigError("backend: expected 'scripted' or 'http'");
  }
  if (mlp.enabled) {
    if (mlp.max_samples < 1 || mlp.epochs < 0) {
      throw ConfigError("mlp: max_samples must be positive and epochs non-negative");
    }
    if (train.size < mlp.max_samples + test_size) {
      throw ConfigError("pools.train.size: must be at least mlp.max_samples + test_size");
    }
  }
  session_config("manifest").validate();
  if (train.seed == test_seed || train.seed == diversity.seed || train.seed == uncertainty.seed) {
    throw ConfigError("pools.train.seed: must differ from the other pool seeds");
  }
}

Manifest manifest_from_json(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw ConfigError("manifest must be a JSON object");
  }
  reject_unknown(j, "", {"env", "value_concept", "seed", "population", "k", "epsilon", "budget", "backend", "pools",
                         "test_size", "metric", "mlp", "bootstrap_resamples", "behavior_mix", "context_budget"});
  Manifest m;
  try {
    m.env = env_from_string(field<std::string>(j, "", "env", "applefarm"));
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("field 'env': ") + e.what());
  }
  m.k = loop::SessionConfig::defaults_for(m.env).k;
  m.value_concept = field<std::string>(j, "", "value_concept", "");
  m.seed = field<std::uint64_t>(j, "", "seed", m.seed);
  m.k = field<int>(j, "", "k", m.k);
  m.epsilon = field<double>(j, "", "epsilon", m.epsilon);
  m.budget = field<int>(j, "", "budget", m.budget);
  m.backend = field<std::string>(j, "", "backend", m.backend);
  m.test_size = field<int>(j, "", "test_size", m.test_size);
  m.bootstrap_resamples = field<int>(j, "", "bootstrap_resamples", m.bootstrap_resamples);
  m.behavior_mix = field<std::string>(j, "", "behavior_mix", m.behavior_mix);
  m.context_budget = field<std::size_t>(j, "", "context_budget", m.context_budget);
  try {
    m.metric = reward::metric_from_string(field<std::string>(j, "", "metric", "balanced_accuracy"));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("field 'metric': ") + e.what());
  }

  if (j.contains("population")) {
    const auto& p = j.at("population");
    if (p.is_string() && p.get<std::string>() == "interactive") {
      m.interactive = true;
    } else if (p.is_object()) {
      reject_unknown(p, "population.", {"users", "heterogeneity", "min_latent", "revision_fraction", "rule_length"});
      m.users = field<int>(p, "population.", "users", m.users);
      m.population.heterogeneity = field<double>(p, "population.", "heterogeneity", m.population.heterogeneity);
      m.population.min_latent = field<int>(p, "population.", "min_latent", m.population.min_latent);
      m.population.revision_fraction =
          field<double>(p, "population.", "revision_fraction", m.population.revision_fraction);
      m.population.rule_length = field<int>(p, "population.", "rule_length", m.population.rule_length);
      if (!(m.population.heterogeneity >= 0.0 && m.population.heterogeneity <= 1.0)) {
        throw ConfigError("field 'population.heterogeneity': must lie in [0, 1]");
      }
      if (!(m.population.revision_fraction >= 0.0 && m.population.revision_fraction <= 1.0)) {
        throw ConfigError("field 'population.revision_fraction': must lie in [0, 1]");
      }
      if (m.population.rule_length < 1 || m.population.min_latent < 0 ||
          m.population.min_latent > m.population.rule_length) {
        throw ConfigError("field 'population.min_latent': must lie in [0, rule_length] with rule_length >= 1");
      }
    } else {
      throw ConfigError("field 'population' must be an object or \"interactive\"");
    }
  }

  if (j.contains("pools")) {
    const auto& pools = object_field(j, "", "pools");
    reject_unknown(pools, "pools.", {"diversity", "uncertainty", "test", "train"});
    m.diversity = pool_field(pools, "diversity", m.diversity, true);
    m.uncertainty = pool_field(pools, "uncertainty", m.uncertainty, true);
    m.test_seed = pool_field(pools, "test", loop::PoolSpec{m.test_seed, m.test_size}, false).seed;
    m.train = pool_field(pools, "train", m.train, true);
  }

  if (j.contains("mlp")) {
    const auto& p = object_field(j, "", "mlp");
    reject_unknown(p, "mlp.", {"enabled", "max_samples", "epochs", "counts"});
    m.mlp.enabled = field<bool>(p, "mlp.", "enabled", m.mlp.enabled);
    m.mlp.max_samples = field<int>(p, "mlp.", "max_samples", m.mlp.max_samples);
    m.mlp.epochs = field<int>(p, "mlp.", "epochs", m.mlp.epochs);
    m.mlp.counts = field<std::vector<int>>(p, "mlp.", "counts", m.mlp.counts);
    for (int c : m.mlp.counts) {
      if (c < 1 || c > m.mlp.max_samples) {
        throw ConfigError("field 'mlp.counts': entries must lie in 1..max_samples");
      }
    }
  }

  m.validate();
  return m;
}

nlohmann::json to_json(const Manifest& m) {
  nlohmann::json population = "interactive";
  if (!m.interactive) {
    population = {{"users", m.users},
                  {"heterogeneity", m.population.heterogeneity},
                  {"min_latent", m.population.min_latent},
                  {"revision_fraction", m.population.revision_fraction},
                  {"rule_length", m.population.rule_length}};
  }
  return nlohmann::json{
      {"env", std::string(to_string(m.env))},
      {"value_concept", m.session_config("manifest").value_concept},
      {"seed", m.seed},
      {"population", population},
      {"k", m.k},
      {"epsilon", m.epsilon},
      {"budget", m.budget},
      {"backend", m.backend},
      {"pools",
       {{"diversity", {{"seed", m.diversity.seed}, {"size", m.diversity.size}}},
        {"uncertainty", {{"seed", m.uncertainty.seed}, {"size", m.uncertainty.size}}},
        {"test", {{"seed", m.test_seed}}},
        {"train", {{"seed", m.train.seed}, {"size", m.train.size}}}}},
      {"test_size", m.test_size},
      {"metric", std::string(reward::to_string(m.metric))},
      {"mlp",
       {{"enabled", m.mlp.enabled}, {"max_samples", m.mlp.max_samples}, {"epochs", m.mlp.epochs},
        {"counts", m.mlp.counts}}},
      {"bootstrap_resamples", m.bootstrap_resamples},
      {"behavior_mix", m.behavior_mix},
      {"context_budget", m.context_budget}};
}

nlohmann::json run_study(const Manifest& m, llm::Backend& backend, const Progress& progress) {
  m.validate();
  if (m.interactive) {
    throw ConfigError("population: interactive manifests run through `serve`, not `run`");
  }
  auto note = [&](const std::string& s) {
    if (progress) {
      progress(s);
    }
  };
  const auto population = oracle::make_population(m.env, m.seed, m.users, m.population);

  nlohmann::json users = nlohmann::json::array();
  std::vector<double> irda_values;
  std::vector<double> base_values;
  stats::LabelMatrix labels; // test item x user
  std::vector<std::set<int>> rule_sets;
  for (const auto& user : population) {
    auto s = loop::Session::create(m.session_config(user.id));
    loop::SimulatedUser driver(user);
    loop::run_session(s, driver, backend);
    const auto report = s.evaluate(backend, std::string(reward::to_string(m.metric)));
    const double vi = report.at("irda").at("value").get<double>();
    const double vb = report.at("baseline").at("value").get<double>();
    irda_values.push_back(vi);
    base_values.push_back(vb);
    rule_sets.push_back(user.rule_features());

    if (labels.empty()) {
      labels.resize(s.test_pool().size());
    }
    for (std::size_t i = 0; i < s.test_pool().size(); ++i) {
      labels[i].push_back(s.test_labels().at(s.test_pool()[i].id));
    }
    users.push_back({{"id", user.id},
                     {"user", oracle::to_json(user)},
                     {"hypothesis_exchanges", s.hypothesis_exchanges()},
                     {"uncertainty_iterations", s.uncertainty_iterations()},
                     {"selections", s.selections()},
                     {"irda", vi},
                     {"baseline", vb},
                     {"irda_single_class", report.at("irda").at("single_class")}});
    note(user.id + ": irda " + std::to_string(vi) + ", baseline " + std::to_string(vb));
  }

  const int resamples = m.bootstrap_resamples;
  nlohmann::json methods{{"irda", summary(irda_values, resamples, mix_seed(m.seed, 0xa1))},
                         {"baseline", summary(base_values, resamples, mix_seed(m.seed, 0xa2))}};
  const auto paired = stats::paired_summary(irda_values, base_values, resamples, mix_seed(m.seed, 0xa3));
  const auto pairwise_j = stats::pairwise_jaccard(rule_sets);
  const auto j_ci = stats::bootstrap_ci(pairwise_j, resamples, 0.95, mix_seed(m.seed, 0xa4));

  nlohmann::json out{{"manifest", to_json(m)},
                     {"backend", backend.name()},
                     {"metric", std::string(reward::to_string(m.metric))},
                     {"users", users},
                     {"methods", methods},
                     {"kappa", stats::mean_pairwise_kappa(labels)},
                     {"fleiss_kappa_all", stats::fleiss_kappa(labels)},
                     {"jaccard_mean", j_ci.mean},
                     {"jaccard_ci", {{"low", j_ci.low}, {"high", j_ci.high}}},
                     {"deltas", paired.deltas},
                     {"delta_ci", stats::to_json(paired.delta_ci)},
                     {"wilcoxon", paired.has_signal ? stats::to_json(paired.wilcoxon) : nlohmann::json()},
                     {"wilcoxon_p", paired.has_signal ? nlohmann::json(paired.wilcoxon.p_two_sided) : nlohmann::json()}};

  if (m.mlp.enabled) {
    note("training MLP curves");
    const auto pool = env::make_pool(m.env, m.train.seed, m.train.size, m.behavior_mix);
    curves::CurveOptions co;
    co.max_samples = m.mlp.max_samples;
    co.test_size = m.test_size;
    co.counts = m.mlp.counts;
    co.metric = m.metric;
    co.train.epochs = m.mlp.epochs;
    co.bootstrap_resamples = resamples;
    const auto cp = curves::build_curves(population, pool, m.seed, co);
    auto last = [&](const curves::TrainingCurve& c, std::uint64_t tag) {
      std::vector<double> values;
      for (const auto& [id, series] : c.metric_by_count) {
        values.push_back(series.back());
      }
      auto j = summary(values, resamples, mix_seed(m.seed, tag));
      j["samples"] = c.sample_counts.back();
      return j;
    };
    out["methods"]["mlp_individual"] = last(cp.individual, 0xa5);
    out["methods"]["mlp_collective"] = last(cp.collective, 0xa6);
    out["curves"] = {{"individual", curves::to_json(cp.individual)}, {"collective", curves::to_json(cp.collective)}};
  }
  return out;
}

} // namespace irda::study
