#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

// One-hidden-layer perceptron (32 ReLU units, logistic output) trained with
// Adam on binary cross-entropy.
namespace irda::mlp {

inline constexpr int kHidden = 32;

struct AdamState {
  Eigen::MatrixXd m_w1, v_w1;
  Eigen::VectorXd m_b1, v_b1;
  Eigen::VectorXd m_w2, v_w2;
  double m_b2 = 0.0, v_b2 = 0.0;
  long step = 0;
};

struct Model {
  Eigen::MatrixXd w1; // kHidden x input_dim
  Eigen::VectorXd b1; // kHidden
  Eigen::VectorXd w2; // kHidden
  double b2 = 0.0;
  AdamState adam;

  int input_dim() const { return static_cast<int>(w1.cols()); }
  bool finite() const;
};

struct Gradients {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::VectorXd w2;
  double b2 = 0.0;
};

struct TrainOptions {
  int epochs = 200;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Full batch up to this many samples, minibatches of this size above it.
  int batch_size = 32;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero Adam moments.
Model init(int input_dim, std::uint64_t seed);

/// Rows of X are samples.
Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows);

Eigen::VectorXd predict_proba(const Model& m, const Eigen::MatrixXd& x);
std::vector<int> predict(const Model& m, const Eigen::MatrixXd& x);

/// Mean binary cross-entropy; fills `grad` when non-null.
double loss(const Model& m, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Gradients* grad = nullptr);

/// Trains in place. Deterministic given `seed` (minibatch order).
void train(Model& m, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TrainOptions& options,
           std::uint64_t seed);

double accuracy(const Model& m, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

} // namespace irda::mlp
