#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "xchan/random.hpp"

namespace xchan {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Log-bilinear critic: the pair score is x^T W e, and g(x, e) = exp(x^T W e).
struct BilinearCritic {
  Matrix weight;  // d_x x d_e

  // Entries uniform on +-sqrt(6 / (d_x + d_e)).
  static BilinearCritic glorot(Eigen::Index dx, Eigen::Index de, Rng& rng);
  static BilinearCritic zeros(Eigen::Index dx, Eigen::Index de) { return {Matrix::Zero(dx, de)}; }
};

double bilinear_logit(const Vector& x, const Matrix& W, const Vector& e);

double log_sum_exp(std::span<const double> values);
std::vector<double> log_softmax(std::span<const double> logits);

// Column-wise log-softmax of a matrix (each column normalized independently).
Matrix log_softmax_columns(const Matrix& logits);

// Linear layer mapping a d-dimensional input to class logits.
struct LinearPredictor {
  Matrix weights;  // d x C
  Matrix bias;     // 1 x C

  static LinearPredictor glorot(Eigen::Index dim, Eigen::Index classes, Rng& rng);

  Eigen::Index dim() const { return weights.rows(); }
  Eigen::Index classes() const { return weights.cols(); }
  Matrix logits(const Matrix& inputs) const;  // rows are instances
};

struct CrossEntropyResult {
  double loss = 0.0;  // mean negative log-likelihood, nats
  Matrix grad_weights;
  Matrix grad_bias;
};

// Mean NLL of `labels` under softmax(inputs * W + b), with its gradient.
CrossEntropyResult cross_entropy_with_grad(const LinearPredictor& model, const Matrix& inputs,
                                           std::span<const int> labels);
double cross_entropy(const LinearPredictor& model, const Matrix& inputs, std::span<const int> labels);

// log h(y_i | input_i) per row.
Vector label_log_probs(const LinearPredictor& model, const Matrix& inputs, std::span<const int> labels);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::int64_t step_count = 0;
};

struct NamedParam {
  std::string name;
  Matrix* value;
};

AdamState make_adam_state(std::span<const NamedParam> params, AdamConfig config);

// Bias-corrected Adam update in place. Throws NumericError naming the first
// parameter with a non-finite gradient; nothing is modified in that case.
void adam_step(std::span<const NamedParam> params, std::span<const Matrix> grads, AdamState& state);

// Everything needed to resume a training run bit-exactly.
struct Checkpoint {
  std::vector<std::pair<std::string, Matrix>> tensors;
  AdamState optimizer;
  std::string rng_state;
  nlohmann::json extra = nlohmann::json::object();
};

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace xchan
