#include "irda/curves.hpp"

#include <iomanip>
#include <sstream>

namespace irda::curves {

std::string_view to_string(Variant v) {
  return v == Variant::Individual ? "individual" : "collective";
}

namespace {

double score(const mlp::Model& m, const Eigen::MatrixXd& x, const std::vector<int>& truth, reward::Metric metric) {
  const auto c = reward::confusion(mlp::predict(m, x), truth);
  return reward::metric_value(c, metric);
}

} // namespace

CurvePair build_curves(const std::vector<oracle::UserModel>& population, const std::vector<Stimulus>& pool,
                       std::uint64_t seed, const CurveOptions& options) {
  if (population.empty()) {
    throw ConfigError("curves need at least one user");
  }
  if (options.max_samples < 1 || options.test_size < 1) {
    throw ConfigError("max_samples and test_size must be positive");
  }
  const auto needed = static_cast<std::size_t>(options.max_samples + options.test_size);
  if (pool.size() < needed) {
    throw ConfigError("pool has " + std::to_string(pool.size()) + " items, curves need " + std::to_string(needed));
  }
  std::vector<int> counts = options.counts;
  if (counts.empty()) {
    for (int n = 1; n <= options.max_samples; ++n) {
      counts.push_back(n);
    }
  }
  for (int n : counts) {
    if (n < 1 || n > options.max_samples) {
      throw ConfigError("sample count " + std::to_string(n) + " is outside 1.." + std::to_string(options.max_samples));
    }
  }

  const auto test_n = static_cast<std::size_t>(options.test_size);
  std::vector<std::vector<double>> test_rows;
  std::vector<std::vector<double>> train_rows;
  for (std::size_t i = 0; i < needed; ++i) {
    (i < test_n ? test_rows : train_rows).push_back(pool[i].model_input);
  }
  const Eigen::MatrixXd x_test = mlp::to_matrix(test_rows);
  const Eigen::MatrixXd x_train = mlp::to_matrix(train_rows);
  const int dim = static_cast<int>(x_test.cols());

  std::vector<std::vector<int>> test_labels(population.size());
  std::vector<std::vector<int>> train_labels(population.size());
  for (std::size_t u = 0; u < population.size(); ++u) {
    for (std::size_t i = 0; i < needed; ++i) {
      (i < test_n ? test_labels : train_labels)[u].push_back(population[u].settled_label(pool[i].features));
    }
  }

  CurvePair out;
  out.individual.variant = Variant::Individual;
  out.collective.variant = Variant::Collective;
  out.individual.sample_counts = counts;
  out.collective.sample_counts = counts;

  for (int n : counts) {
    // Same initialization and shuffle stream for both variants at a given n.
    const std::uint64_t run_seed = mix_seed(seed, static_cast<std::uint64_t>(n));
    const Eigen::MatrixXd x_n = x_train.topRows(n);

    const auto users = static_cast<Eigen::Index>(population.size());
    Eigen::MatrixXd x_col(users * n, dim);
    Eigen::VectorXd y_col(users * n);
    for (Eigen::Index u = 0; u < users; ++u) {
      x_col.middleRows(u * n, n) = x_n;
      for (int i = 0; i < n; ++i) {
        y_col(u * n + i) = train_labels[static_cast<std::size_t>(u)][static_cast<std::size_t>(i)];
      }
    }
    mlp::Model collective = mlp::init(dim, run_seed);
    mlp::train(collective, x_col, y_col, options.train, run_seed);

    for (std::size_t u = 0; u < population.size(); ++u) {
      Eigen::VectorXd y_n(n);
      for (int i = 0; i < n; ++i) {
        y_n(i) = train_labels[u][static_cast<std::size_t>(i)];
      }
      mlp::Model individual = mlp::init(dim, run_seed);
      mlp::train(individual, x_n, y_n, options.train, run_seed);
      const auto& id = population[u].id;
      out.individual.metric_by_count[id].push_back(score(individual, x_test, test_labels[u], options.metric));
      out.collective.metric_by_count[id].push_back(score(collective, x_test, test_labels[u], options.metric));
    }
  }

  for (auto* curve : {&out.individual, &out.collective}) {
    for (std::size_t c = 0; c < counts.size(); ++c) {
      std::vector<double> values;
      for (const auto& [id, series] : curve->metric_by_count) {
        values.push_back(series[c]);
      }
      curve->bands.push_back(stats::bootstrap_ci(values, options.bootstrap_resamples, 0.95,
                                                 mix_seed(seed, 0xc0de + c)));
    }
  }
  return out;
}

nlohmann::json to_json(const TrainingCurve& c) {
  nlohmann::json bands = nlohmann::json::array();
  for (const auto& b : c.bands) {
    bands.push_back(stats::to_json(b));
  }
  return nlohmann::json{{"variant", std::string(to_string(c.variant))},
                        {"sample_counts", c.sample_counts},
                        {"metric_by_count", c.metric_by_count},
                        {"bands", bands}};
}

std::string to_csv(const CurvePair& p) {
  std::ostringstream out;
  out << "count,mean,ci_low,ci_high,variant\n" << std::fixed << std::setprecision(6);
  for (const auto* curve : {&p.individual, &p.collective}) {
    for (std::size_t c = 0; c < curve->sample_counts.size(); ++c) {
      const auto& b = curve->bands[c];
      out << curve->sample_counts[c] << ',' << b.mean << ',' << b.low << ',' << b.high << ','
          << to_string(curve->variant) << '\n';
    }
  }
  return out.str();
}

} // namespace irda::curves
