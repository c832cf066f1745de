#include "irda/mlp.hpp"

#include "irda/common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace irda::mlp {

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_shapes(const Model& m, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.cols() != m.input_dim()) {
    throw ValidationError("input has " + std::to_string(x.cols()) + " columns, model expects " +
                          std::to_string(m.input_dim()));
  }
  if (x.rows() != y.size()) {
    throw ValidationError("inputs and labels differ in length");
  }
}

template <typename P>
void adam_update(P& param, P& m, P& v, const P& g, const TrainOptions& o, double c1, double c2) {
  m = o.beta1 * m + (1 - o.beta1) * g;
  v = o.beta2 * v + (1 - o.beta2) * g.cwiseProduct(g);
  param -= (o.learning_rate * (m / c1).array() / ((v / c2).array().sqrt() + o.adam_eps)).matrix();
}

} // namespace

bool Model::finite() const {
  return w1.allFinite() && b1.allFinite() && w2.allFinite() && std::isfinite(b2);
}

Model init(int input_dim, std::uint64_t seed) {
  if (input_dim < 1) {
    throw ValidationError("input dimension must be positive");
  }
  std::mt19937_64 rng(mix_seed(seed, 0x31f));
  const double r1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double r2 = 1.0 / std::sqrt(static_cast<double>(kHidden));
  std::uniform_real_distribution<double> u1(-r1, r1);
  std::uniform_real_distribution<double> u2(-r2, r2);
  Model m;
  m.w1.resize(kHidden, input_dim);
  for (int i = 0; i < kHidden; ++i) {
    for (int j = 0; j < input_dim; ++j) {
      m.w1(i, j) = u1(rng);
    }
  }
  m.b1.resize(kHidden);
  for (int i = 0; i < kHidden; ++i) {
    m.b1(i) = u1(rng);
  }
  m.w2.resize(kHidden);
  for (int i = 0; i < kHidden; ++i) {
    m.w2(i) = u2(rng);
  }
  m.b2 = u2(rng);
  m.adam.m_w1 = Eigen::MatrixXd::Zero(kHidden, input_dim);
  m.adam.v_w1 = m.adam.m_w1;
  m.adam.m_b1 = Eigen::VectorXd::Zero(kHidden);
  m.adam.v_b1 = m.adam.m_b1;
  m.adam.m_w2 = Eigen::VectorXd::Zero(kHidden);
  m.adam.v_w2 = m.adam.m_w2;
  return m;
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) {
    return {};
  }
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) {
      throw ValidationError("input rows differ in dimension");
    }
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return x;
}

Eigen::VectorXd predict_proba(const Model& m, const Eigen::MatrixXd& x) {
  if (x.cols() != m.input_dim()) {
    throw ValidationError("input dimension mismatch");
  }
  const Eigen::MatrixXd h = ((x * m.w1.transpose()).rowwise() + m.b1.transpose()).cwiseMax(0.0);
  Eigen::VectorXd z = (h * m.w2).array() + m.b2;
  return z.unaryExpr([](double v) { return sigmoid(v); });
}

std::vector<int> predict(const Model& m, const Eigen::MatrixXd& x) {
  const Eigen::VectorXd p = predict_proba(m, x);
  std::vector<int> out(static_cast<std::size_t>(p.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    out[static_cast<std::size_t>(i)] = p(i) > 0.5 ? 1 : 0;
  }
  return out;
}

double loss(const Model& m, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Gradients* grad) {
  check_shapes(m, x, y);
  const double n = static_cast<double>(x.rows());
  const Eigen::MatrixXd pre = (x * m.w1.transpose()).rowwise() + m.b1.transpose();
  const Eigen::MatrixXd h = pre.cwiseMax(0.0);
  const Eigen::VectorXd z = (h * m.w2).array() + m.b2;
  double total = 0.0;
  Eigen::VectorXd dz(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    // BCE with logits: y*softplus(-z) + (1-y)*softplus(z).
    total += y(i) * softplus(-z(i)) + (1 - y(i)) * softplus(z(i));
    dz(i) = (sigmoid(z(i)) - y(i)) / n;
  }
  if (grad != nullptr) {
    grad->w2 = h.transpose() * dz;
    grad->b2 = dz.sum();
    const Eigen::MatrixXd dh = dz * m.w2.transpose();
    const Eigen::MatrixXd dpre = dh.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
    grad->w1 = dpre.transpose() * x;
    grad->b1 = dpre.colwise().sum().transpose();
  }
  return total / n;
}

void train(Model& m, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TrainOptions& o, std::uint64_t seed) {
  check_shapes(m, x, y);
  if (x.rows() == 0) {
    throw ValidationError("training data is empty");
  }
  if (o.epochs < 0 || o.batch_size < 1) {
    throw ValidationError("epochs must be non-negative and batch size positive");
  }
  std::mt19937_64 rng(mix_seed(seed, 0x5a1));
  const auto n = static_cast<std::size_t>(x.rows());
  const auto batch = static_cast<std::size_t>(o.batch_size);
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  Gradients g;
  auto step = [&](const Eigen::MatrixXd& bx, const Eigen::VectorXd& by) {
    loss(m, bx, by, &g);
    auto& a = m.adam;
    ++a.step;
    const double c1 = 1 - std::pow(o.beta1, static_cast<double>(a.step));
    const double c2 = 1 - std::pow(o.beta2, static_cast<double>(a.step));
    adam_update(m.w1, a.m_w1, a.v_w1, g.w1, o, c1, c2);
    adam_update(m.b1, a.m_b1, a.v_b1, g.b1, o, c1, c2);
    adam_update(m.w2, a.m_w2, a.v_w2, g.w2, o, c1, c2);
    a.m_b2 = o.beta1 * a.m_b2 + (1 - o.beta1) * g.b2;
    a.v_b2 = o.beta2 * a.v_b2 + (1 - o.beta2) * g.b2 * g.b2;
    m.b2 -= o.learning_rate * (a.m_b2 / c1) / (std::sqrt(a.v_b2 / c2) + o.adam_eps);
  };
  for (int epoch = 0; epoch < o.epochs; ++epoch) {
    if (n <= batch) {
      step(x, y);
      continue;
    }
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t len = std::min(batch, n - start);
      Eigen::MatrixXd bx(static_cast<Eigen::Index>(len), x.cols());
      Eigen::VectorXd by(static_cast<Eigen::Index>(len));
      for (std::size_t i = 0; i < len; ++i) {
        bx.row(static_cast<Eigen::Index>(i)) = x.row(order[start + i]);
        by(static_cast<Eigen::Index>(i)) = y(order[start + i]);
      }
      step(bx, by);
    }
  }
}

double accuracy(const Model& m, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  check_shapes(m, x, y);
  const auto p = predict(m, x);
  double correct = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    correct += p[i] == static_cast<int>(y(static_cast<Eigen::Index>(i))) ? 1 : 0;
  }
  return correct / static_cast<double>(p.size());
}

} // namespace irda::mlp
