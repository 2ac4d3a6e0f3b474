#include "xchan/v_information.hpp"

#include <cmath>
#include <set>

#include "xchan/errors.hpp"
#include "xchan/random.hpp"

namespace xchan {

NullInput make_null_input(std::uint64_t seed, Eigen::Index dim, double scale, NullScale mode) {
  if (dim < 1) throw InvalidInput("make_null_input: dimension must be positive");
  NullInput out;
  out.seed = seed;
  out.stddev = mode == NullScale::variance ? std::sqrt(scale) : scale;
  out.values.resize(dim);
  Rng rng(seed);
  for (Eigen::Index i = 0; i < dim; ++i) out.values(i) = rng.normal(0.0, out.stddev);
  return out;
}

Matrix null_design(const NullInput& null_input, Eigen::Index rows) {
  return null_input.values.transpose().replicate(rows, 1);
}

Matrix resampled_null_design(std::uint64_t seed, Eigen::Index rows, Eigen::Index dim, double stddev) {
  Rng rng(seed);
  Matrix m(rows, dim);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) m(i, j) = rng.normal(0.0, stddev);
  }
  return m;
}

FittedPredictor fit_predictor(const Matrix& inputs, std::span<const int> labels, const Matrix& validation_inputs,
                              std::span<const int> validation_labels, const PredictorConfig& config,
                              std::uint64_t seed, int num_classes) {
  if (inputs.rows() == 0 || validation_inputs.rows() == 0) throw InvalidInput("fit_predictor: empty split");
  if (static_cast<Eigen::Index>(labels.size()) != inputs.rows() ||
      static_cast<Eigen::Index>(validation_labels.size()) != validation_inputs.rows()) {
    throw InvalidInput("fit_predictor: label/vector count mismatch");
  }
  if (inputs.cols() != validation_inputs.cols()) throw InvalidInput("fit_predictor: train/validation dims differ");
  if (config.lr <= 0 || config.epochs < 1 || config.batch_size < 1) {
    throw InvalidInput("fit_predictor: lr, epochs and batch size must be positive");
  }

  FittedPredictor out;
  out.single_class = std::set<int>(labels.begin(), labels.end()).size() < 2;

  Rng init_rng(derive_seed(seed, 1));
  Rng shuffle_rng(derive_seed(seed, 2));
  auto model = LinearPredictor::glorot(inputs.cols(), num_classes, init_rng);
  const NamedParam params[] = {{"weights", &model.weights}, {"bias", &model.bias}};
  auto adam = make_adam_state(params, AdamConfig{.lr = config.lr});

  auto evaluate = [&](std::int64_t step) {
    const double nll = cross_entropy(model, validation_inputs, validation_labels);
    out.validation_history.push_back(nll);
    if (!std::isfinite(nll)) throw NumericError("predictor validation NLL diverged", out.train_history);
    if (out.validation_history.size() == 1 || nll < out.best_validation_nll) {
      out.best_validation_nll = nll;
      out.best_step = step;
      out.model = model;
    }
  };

  evaluate(0);
  const auto n = static_cast<std::size_t>(inputs.rows());
  Matrix batch_inputs;
  std::vector<int> batch_labels;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = shuffle_rng.permutation(n);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const auto len = std::min(config.batch_size, n - start);
      batch_inputs.resize(static_cast<Eigen::Index>(len), inputs.cols());
      batch_labels.resize(len);
      for (std::size_t k = 0; k < len; ++k) {
        batch_inputs.row(static_cast<Eigen::Index>(k)) = inputs.row(static_cast<Eigen::Index>(order[start + k]));
        batch_labels[k] = labels[order[start + k]];
      }
      auto ce = cross_entropy_with_grad(model, batch_inputs, batch_labels);
      if (!std::isfinite(ce.loss)) throw NumericError("predictor training loss diverged", out.train_history);
      out.train_history.push_back(ce.loss);
      const Matrix grads[] = {std::move(ce.grad_weights), std::move(ce.grad_bias)};
      adam_step(params, grads, adam);
    }
    evaluate(adam.step_count);
  }
  return out;
}

VInfoEstimate v_information(const LinearPredictor& null_model, const LinearPredictor& conditional_model,
                            std::span<const int> labels, const Matrix& null_inputs, const Matrix& explanans,
                            const std::vector<std::string>& ids) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (n == 0) throw InvalidInput("v_information: empty evaluation split");
  if (null_inputs.rows() != n || explanans.rows() != n || static_cast<Eigen::Index>(ids.size()) != n) {
    throw InvalidInput("v_information: label/vector count mismatch");
  }
  const Vector null_logp = label_log_probs(null_model, null_inputs, labels);
  const Vector cond_logp = label_log_probs(conditional_model, explanans, labels);

  VInfoEstimate est;
  est.h_entropy = -null_logp.mean();
  est.h_conditional = -cond_logp.mean();
  est.v_information = est.h_entropy - est.h_conditional;
  est.pointwise.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    est.pointwise.push_back({ids[static_cast<std::size_t>(i)], -null_logp(i) + cond_logp(i)});
  }
  return est;
}

}  // namespace xchan
