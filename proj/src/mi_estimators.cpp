#include "xchan/mi_estimators.hpp"

#include <algorithm>
#include <cmath>

#include "xchan/errors.hpp"

namespace xchan {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kValidationStream = 3;

MiBatch gather(const PairedData& data, std::span<const std::size_t> rows) {
  MiBatch b;
  const auto n = static_cast<Eigen::Index>(rows.size());
  b.xs.resize(n, data.xs.cols());
  b.es.resize(n, data.es.cols());
  b.ids.reserve(rows.size());
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(k)]);
    b.xs.row(k) = data.xs.row(r);
    b.es.row(k) = data.es.row(r);
    b.ids.push_back(data.ids.empty() ? std::to_string(r) : data.ids[static_cast<std::size_t>(r)]);
  }
  return b;
}

void check_critic(const MiBatch& batch, const Matrix& weight) {
  if (weight.rows() != batch.xs.cols() || weight.cols() != batch.es.cols()) {
    throw InvalidInput("critic is " + std::to_string(weight.rows()) + "x" + std::to_string(weight.cols()) +
                       " but batch has d_x=" + std::to_string(batch.xs.cols()) +
                       ", d_e=" + std::to_string(batch.es.cols()));
  }
  if (batch.xs.rows() != batch.es.rows()) throw InvalidInput("batch rows misaligned");
  if (batch.xs.rows() < 1) throw InvalidInput("empty batch");
}

// Marginal log-weights for the alternative bounds, in row-major
// off-diagonal order, plus the gradient multiplier per entry.
struct OffDiagonal {
  std::vector<double> values;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> where;
};

OffDiagonal off_diagonal(const Matrix& s) {
  OffDiagonal out;
  for (Eigen::Index j = 0; j < s.rows(); ++j) {
    for (Eigen::Index k = 0; k < s.cols(); ++k) {
      if (j == k) continue;
      out.values.push_back(s(j, k));
      out.where.emplace_back(j, k);
    }
  }
  return out;
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// ln mean exp(min(max(m, -tau), tau)) and the per-entry derivative.
double clipped_log_mean_exp(std::span<const double> m, double tau, std::vector<double>* grad) {
  std::vector<double> clipped(m.size());
  for (std::size_t k = 0; k < m.size(); ++k) clipped[k] = std::clamp(m[k], -tau, tau);
  const double lse = log_sum_exp(clipped);
  if (grad) {
    grad->resize(m.size());
    for (std::size_t k = 0; k < m.size(); ++k) {
      const bool inside = std::abs(m[k]) < tau;
      (*grad)[k] = inside ? std::exp(clipped[k] - lse) : 0.0;
    }
  }
  return lse - std::log(static_cast<double>(m.size()));
}

}  // namespace

void PairedData::validate() const {
  if (xs.rows() != es.rows()) {
    throw InvalidInput("paired data has " + std::to_string(xs.rows()) + " x rows but " + std::to_string(es.rows()) +
                       " e rows");
  }
  if (!ids.empty() && static_cast<Eigen::Index>(ids.size()) != xs.rows()) {
    throw InvalidInput("paired data id count does not match rows");
  }
}

std::string_view to_string(MiEstimator kind) {
  switch (kind) {
    case MiEstimator::infonce: return "infonce";
    case MiEstimator::mine: return "mine";
    case MiEstimator::nwj: return "nwj";
    case MiEstimator::smile: return "smile";
  }
  return "infonce";
}

std::optional<MiEstimator> parse_estimator(std::string_view text) {
  for (auto k : {MiEstimator::infonce, MiEstimator::mine, MiEstimator::nwj, MiEstimator::smile}) {
    if (text == to_string(k)) return k;
  }
  return std::nullopt;
}

std::vector<MiBatch> make_batches(const PairedData& data, std::size_t batch_size,
                                  std::optional<std::uint64_t> shuffle_seed) {
  data.validate();
  if (batch_size == 0) throw InvalidInput("batch size must be positive");
  const auto n = static_cast<std::size_t>(data.size());
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (shuffle_seed) {
    Rng rng(*shuffle_seed);
    rng.shuffle(order);
  }
  std::vector<MiBatch> batches;
  for (std::size_t start = 0; start + batch_size <= n; start += batch_size) {
    batches.push_back(gather(data, std::span(order).subspan(start, batch_size)));
  }
  return batches;
}

Matrix infonce_logits(const MiBatch& batch, const BilinearCritic& critic) {
  check_critic(batch, critic.weight);
  return batch.xs * critic.weight * batch.es.transpose();
}

double infonce_batch_loss(const MiBatch& batch, const BilinearCritic& critic) {
  const Matrix logp = log_softmax_columns(infonce_logits(batch, critic));
  return -logp.diagonal().mean();
}

LossAndGrad infonce_loss_with_grad(const MiBatch& batch, const BilinearCritic& critic) {
  const Matrix logp = log_softmax_columns(infonce_logits(batch, critic));
  const auto n = static_cast<double>(batch.xs.rows());
  Matrix g = logp.array().exp();
  g.diagonal().array() -= 1.0;
  g /= n;
  return {-logp.diagonal().mean(), batch.xs.transpose() * g * batch.es};
}

MiEstimate infonce_estimate(std::span<const MiBatch> batches, const BilinearCritic& critic) {
  if (batches.empty()) throw InvalidInput("infonce_estimate: no full batch available");
  MiEstimate est;
  est.estimator = MiEstimator::infonce;
  est.batch_size = static_cast<std::size_t>(batches.front().xs.rows());
  const double log_n = std::log(static_cast<double>(est.batch_size));
  double total = 0.0;
  for (const auto& b : batches) {
    if (static_cast<std::size_t>(b.xs.rows()) != est.batch_size) {
      throw InvalidInput("infonce_estimate: batches differ in size");
    }
    const Matrix logp = log_softmax_columns(infonce_logits(b, critic));
    for (Eigen::Index i = 0; i < logp.cols(); ++i) {
      const double score = log_n + logp(i, i);
      if (!(score <= log_n)) throw NumericError("pointwise InfoNCE score exceeds ln N or is NaN");
      est.pointwise.push_back({b.ids.empty() ? std::to_string(i) : b.ids[static_cast<std::size_t>(i)], score});
    }
    const double batch_est = log_n + logp.diagonal().mean();
    est.batch_estimates.push_back(batch_est);
    total += batch_est;
  }
  est.dataset_nats = total / static_cast<double>(batches.size());
  return est;
}

TrainedCritic train_infonce(const PairedData& train, const PairedData& validation, const InfoNceConfig& config,
                            std::uint64_t seed) {
  train.validate();
  validation.validate();
  if (config.lr <= 0 || config.epochs < 1 || config.batch_size < 1) {
    throw InvalidInput("train_infonce: lr, epochs and batch size must be positive");
  }
  if (static_cast<std::size_t>(train.size()) < config.batch_size) {
    throw InvalidInput("train_infonce: training set smaller than one batch");
  }
  const auto val_batches = make_batches(validation, config.batch_size, derive_seed(seed, kValidationStream));
  if (val_batches.empty()) throw InvalidInput("train_infonce: validation set smaller than one batch");

  Rng init_rng(derive_seed(seed, kInitStream));
  Rng shuffle_rng(derive_seed(seed, kShuffleStream));

  TrainedCritic out;
  BilinearCritic critic = BilinearCritic::glorot(train.xs.cols(), train.es.cols(), init_rng);
  const NamedParam params[] = {{"W", &critic.weight}};
  auto adam = make_adam_state(params, AdamConfig{.lr = config.lr});

  auto validation_loss = [&] {
    double sum = 0.0;
    for (const auto& b : val_batches) sum += infonce_batch_loss(b, critic);
    return sum / static_cast<double>(val_batches.size());
  };
  auto evaluate = [&](std::int64_t step) {
    const double loss = validation_loss();
    out.validation_history.push_back(loss);
    if (!std::isfinite(loss)) throw NumericError("validation loss diverged", out.train_history);
    if (out.validation_history.size() == 1 || loss < out.best_validation_loss) {
      out.best_validation_loss = loss;
      out.best_step = step;
      out.critic = critic;
    }
  };

  evaluate(0);
  const auto n = static_cast<std::size_t>(train.size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = shuffle_rng.permutation(n);
    for (std::size_t start = 0; start + config.batch_size <= n; start += config.batch_size) {
      const auto batch = gather(train, std::span(order).subspan(start, config.batch_size));
      auto [loss, grad] = infonce_loss_with_grad(batch, critic);
      if (!std::isfinite(loss)) throw NumericError("InfoNCE training loss diverged", out.train_history);
      out.train_history.push_back(loss);
      const Matrix grads[] = {std::move(grad)};
      adam_step(params, grads, adam);
      if (config.eval_every > 0 && adam.step_count % config.eval_every == 0) evaluate(adam.step_count);
    }
    if (config.eval_every <= 0) evaluate(adam.step_count);
  }
  return out;
}

double alt_bound(AltBound bound, std::span<const double> joint, std::span<const double> marginal) {
  if (joint.empty() || marginal.empty()) throw InvalidInput("alt_bound: empty score list");
  const double joint_mean = mean_of(joint);
  switch (bound.kind) {
    case MiEstimator::mine:
      return joint_mean - (log_sum_exp(marginal) - std::log(static_cast<double>(marginal.size())));
    case MiEstimator::nwj: {
      double s = 0.0;
      for (double m : marginal) s += std::exp(m - 1.0);
      if (!std::isfinite(s)) throw NumericError("nwj: exp(marginal - 1) overflowed; consider the clipped smile bound");
      return joint_mean - s / static_cast<double>(marginal.size());
    }
    case MiEstimator::smile:
      return joint_mean - clipped_log_mean_exp(marginal, bound.tau, nullptr);
    case MiEstimator::infonce:
      break;
  }
  throw InvalidInput("alt_bound: infonce is not an alternative bound");
}

AltBoundGrad alt_bound_with_grad(AltBound bound, const MiBatch& batch, const AltCritic& critic) {
  check_critic(batch, critic.weight);
  const auto n = batch.xs.rows();
  if (n < 2) throw InvalidInput("alt_bound: batch needs at least two rows for marginal samples");
  Matrix s = batch.xs * critic.weight * batch.es.transpose();
  s.array() += critic.bias;

  const Vector diag = s.diagonal();
  const auto off = off_diagonal(s);
  const auto m = static_cast<double>(off.values.size());
  std::vector<double> marginal_grad(off.values.size());
  double normalizer = 0.0;
  switch (bound.kind) {
    case MiEstimator::mine:
    case MiEstimator::smile: {
      const double tau = bound.kind == MiEstimator::mine ? std::numeric_limits<double>::infinity() : bound.tau;
      normalizer = clipped_log_mean_exp(off.values, tau, &marginal_grad);
      break;
    }
    case MiEstimator::nwj: {
      for (std::size_t k = 0; k < off.values.size(); ++k) {
        const double t = std::exp(off.values[k] - 1.0);
        normalizer += t / m;
        marginal_grad[k] = t / m;
      }
      if (!std::isfinite(normalizer)) throw NumericError("nwj: exp(marginal - 1) overflowed");
      break;
    }
    case MiEstimator::infonce:
      throw InvalidInput("alt_bound: infonce is not an alternative bound");
  }

  Matrix g = Matrix::Zero(n, n);
  g.diagonal().setConstant(1.0 / static_cast<double>(n));
  for (std::size_t k = 0; k < off.where.size(); ++k) g(off.where[k].first, off.where[k].second) = -marginal_grad[k];

  AltBoundGrad out;
  out.bound = diag.mean() - normalizer;
  out.grad_weight = batch.xs.transpose() * g * batch.es;
  out.grad_bias = g.sum();
  return out;
}

MiEstimate alt_bound_estimate(std::span<const MiBatch> batches, const AltCritic& critic, AltBound bound) {
  if (batches.empty()) throw InvalidInput("alt_bound_estimate: no full batch available");
  MiEstimate est;
  est.estimator = bound.kind;
  est.batch_size = static_cast<std::size_t>(batches.front().xs.rows());
  double total = 0.0;
  for (const auto& b : batches) {
    check_critic(b, critic.weight);
    Matrix s = b.xs * critic.weight * b.es.transpose();
    s.array() += critic.bias;
    std::vector<double> joint(static_cast<std::size_t>(s.rows()));
    for (Eigen::Index i = 0; i < s.rows(); ++i) joint[static_cast<std::size_t>(i)] = s(i, i);
    const auto off = off_diagonal(s);
    const double value = alt_bound(bound, joint, off.values);
    // Pointwise: own joint score minus the shared batch normalizer.
    const double normalizer = mean_of(joint) - value;
    for (std::size_t i = 0; i < joint.size(); ++i) {
      est.pointwise.push_back({b.ids.empty() ? std::to_string(i) : b.ids[i], joint[i] - normalizer});
    }
    est.batch_estimates.push_back(value);
    total += value;
  }
  est.dataset_nats = total / static_cast<double>(batches.size());
  return est;
}

TrainedAltCritic train_alt_bound(const PairedData& train, const PairedData& validation, const AltTrainConfig& config,
                                 std::uint64_t seed) {
  train.validate();
  validation.validate();
  if (config.bound.kind == MiEstimator::infonce) throw InvalidInput("train_alt_bound: use train_infonce");
  if (config.lr <= 0 || config.epochs < 1 || config.batch_size < 2) {
    throw InvalidInput("train_alt_bound: lr and epochs must be positive and batch size at least 2");
  }
  const auto val_batches = make_batches(validation, config.batch_size, derive_seed(seed, kValidationStream));
  if (val_batches.empty()) throw InvalidInput("train_alt_bound: validation set smaller than one batch");

  Rng init_rng(derive_seed(seed, kInitStream));
  Rng shuffle_rng(derive_seed(seed, kShuffleStream));
  AltCritic critic{BilinearCritic::glorot(train.xs.cols(), train.es.cols(), init_rng).weight, 0.0};
  Matrix bias = Matrix::Zero(1, 1);
  const NamedParam params[] = {{"W", &critic.weight}, {"b", &bias}};
  auto adam = make_adam_state(params, AdamConfig{.lr = config.lr});

  TrainedAltCritic out;
  auto evaluate = [&](bool first) {
    critic.bias = bias(0, 0);
    double sum = 0.0;
    for (const auto& b : val_batches) sum += alt_bound_with_grad(config.bound, b, critic).bound;
    const double value = sum / static_cast<double>(val_batches.size());
    if (!std::isfinite(value)) throw NumericError("validation bound diverged", out.train_history);
    if (first || value > out.best_validation_bound) {
      out.best_validation_bound = value;
      out.critic = critic;
    }
  };

  evaluate(true);
  const auto n = static_cast<std::size_t>(train.size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = shuffle_rng.permutation(n);
    for (std::size_t start = 0; start + config.batch_size <= n; start += config.batch_size) {
      const auto batch = gather(train, std::span(order).subspan(start, config.batch_size));
      critic.bias = bias(0, 0);
      auto g = alt_bound_with_grad(config.bound, batch, critic);
      if (!std::isfinite(g.bound)) throw NumericError("bound diverged during training", out.train_history);
      out.train_history.push_back(-g.bound);
      Matrix gb(1, 1);
      gb(0, 0) = -g.grad_bias;
      const Matrix grads[] = {-g.grad_weight, gb};
      adam_step(params, grads, adam);
    }
    evaluate(false);
  }
  return out;
}

}  // namespace xchan
