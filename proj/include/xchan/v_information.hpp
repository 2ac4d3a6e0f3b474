#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xchan/mi_estimators.hpp"
#include "xchan/numerics.hpp"

namespace xchan {

// How the 0.01 in the null-input distribution N(0, 0.01) is read.
enum class NullScale { variance, stddev };

// A fixed Gaussian-noise vector standing in for "no explanan".
struct NullInput {
  Vector values;
  std::uint64_t seed = 0;
  double stddev = 0.1;
};

NullInput make_null_input(std::uint64_t seed, Eigen::Index dim, double scale = 0.01,
                          NullScale mode = NullScale::variance);

// `rows` copies of the null vector, one per instance.
Matrix null_design(const NullInput& null_input, Eigen::Index rows);

// Fresh null draws per instance (sensitivity studies only).
Matrix resampled_null_design(std::uint64_t seed, Eigen::Index rows, Eigen::Index dim, double stddev);

struct PredictorConfig {
  double lr = 1e-3;
  std::size_t batch_size = 8;
  int epochs = 10;
};

struct FittedPredictor {
  LinearPredictor model;  // lowest-validation-NLL checkpoint
  std::vector<double> train_history;
  std::vector<double> validation_history;
  double best_validation_nll = 0.0;
  std::int64_t best_step = 0;
  bool single_class = false;  // training labels had one class only
};

// Minimizes mean NLL of a linear predictor with Adam (shuffled minibatches,
// trailing partial batch kept); validates once per epoch.
FittedPredictor fit_predictor(const Matrix& inputs, std::span<const int> labels, const Matrix& validation_inputs,
                              std::span<const int> validation_labels, const PredictorConfig& config,
                              std::uint64_t seed, int num_classes = 3);

struct VInfoEstimate {
  double h_entropy = 0.0;      // H_V(Y), nats
  double h_conditional = 0.0;  // H_V(Y | E), nats
  double v_information = 0.0;  // h_entropy - h_conditional
  std::vector<PointwiseScore> pointwise;  // PVI per instance
};

// Evaluates both predictors on the evaluation split. Pointwise PVI is
// -ln h[null](y) + ln h[e](y).
VInfoEstimate v_information(const LinearPredictor& null_model, const LinearPredictor& conditional_model,
                            std::span<const int> labels, const Matrix& null_inputs, const Matrix& explanans,
                            const std::vector<std::string>& ids);

}  // namespace xchan
