#include "xchan/numerics.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "xchan/errors.hpp"

namespace xchan {

namespace {

Matrix glorot_matrix(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(rows, cols);
  // Row-major fill order so the draw sequence does not depend on storage.
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  }
  return m;
}

void check_labels(std::span<const int> labels, Eigen::Index rows, Eigen::Index classes) {
  if (static_cast<Eigen::Index>(labels.size()) != rows) {
    throw InvalidInput("label count " + std::to_string(labels.size()) + " does not match " + std::to_string(rows) +
                       " input rows");
  }
  for (int y : labels) {
    if (y < 0 || y >= classes) throw InvalidInput("label " + std::to_string(y) + " out of range");
  }
}

// Row-wise log-softmax.
Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

}  // namespace

BilinearCritic BilinearCritic::glorot(Eigen::Index dx, Eigen::Index de, Rng& rng) {
  return {glorot_matrix(dx, de, dx, de, rng)};
}

double bilinear_logit(const Vector& x, const Matrix& W, const Vector& e) {
  if (W.rows() != x.size() || W.cols() != e.size()) {
    throw InvalidInput("bilinear_logit: W is " + std::to_string(W.rows()) + "x" + std::to_string(W.cols()) +
                       " but x has " + std::to_string(x.size()) + " and e has " + std::to_string(e.size()) +
                       " entries");
  }
  return x.dot(W * e);
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw InvalidInput("log_sum_exp: empty input");
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : values) mx = std::max(mx, v);
  if (!std::isfinite(mx)) return mx;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - mx);
  return mx + std::log(sum);
}

std::vector<double> log_softmax(std::span<const double> logits) {
  if (logits.empty()) throw InvalidInput("log_softmax: empty input");
  const double lse = log_sum_exp(logits);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

Matrix log_softmax_columns(const Matrix& logits) { return log_softmax_rows(logits.transpose()).transpose(); }

LinearPredictor LinearPredictor::glorot(Eigen::Index dim, Eigen::Index classes, Rng& rng) {
  return {glorot_matrix(dim, classes, dim, classes, rng), Matrix::Zero(1, classes)};
}

Matrix LinearPredictor::logits(const Matrix& inputs) const {
  if (inputs.cols() != dim()) {
    throw InvalidInput("predictor expects " + std::to_string(dim()) + "-dim inputs, got " +
                       std::to_string(inputs.cols()));
  }
  Matrix z = inputs * weights;
  z.rowwise() += bias.row(0);
  return z;
}

Vector label_log_probs(const LinearPredictor& model, const Matrix& inputs, std::span<const int> labels) {
  check_labels(labels, inputs.rows(), model.classes());
  const Matrix logp = log_softmax_rows(model.logits(inputs));
  Vector out(inputs.rows());
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) out(i) = logp(i, labels[static_cast<std::size_t>(i)]);
  return out;
}

double cross_entropy(const LinearPredictor& model, const Matrix& inputs, std::span<const int> labels) {
  if (inputs.rows() == 0) throw InvalidInput("cross_entropy: no rows");
  return -label_log_probs(model, inputs, labels).mean();
}

CrossEntropyResult cross_entropy_with_grad(const LinearPredictor& model, const Matrix& inputs,
                                           std::span<const int> labels) {
  if (inputs.rows() == 0) throw InvalidInput("cross_entropy: no rows");
  check_labels(labels, inputs.rows(), model.classes());
  const Matrix logp = log_softmax_rows(model.logits(inputs));
  const auto n = static_cast<double>(inputs.rows());

  Matrix dz = logp.array().exp();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    loss -= logp(i, y);
    dz(i, y) -= 1.0;
  }
  dz /= n;
  return {loss / n, inputs.transpose() * dz, dz.colwise().sum()};
}

AdamState make_adam_state(std::span<const NamedParam> params, AdamConfig config) {
  AdamState state;
  state.config = config;
  for (const auto& p : params) {
    state.first_moment.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
    state.second_moment.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
  }
  return state;
}

void adam_step(std::span<const NamedParam> params, std::span<const Matrix> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw InvalidInput("adam_step: " + std::to_string(params.size()) + " params, " + std::to_string(grads.size()) +
                       " grads, optimizer tracks " + std::to_string(state.first_moment.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = *params[k].value;
    if (grads[k].rows() != p.rows() || grads[k].cols() != p.cols() || state.first_moment[k].rows() != p.rows() ||
        state.first_moment[k].cols() != p.cols()) {
      throw InvalidInput("adam_step: shape mismatch for '" + params[k].name + "'");
    }
    if (!grads[k].allFinite()) throw NumericError("non-finite gradient in '" + params[k].name + "'");
  }

  const auto& c = state.config;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    m = c.beta1 * m + (1.0 - c.beta1) * grads[k];
    v = c.beta2 * v + (1.0 - c.beta2) * grads[k].cwiseProduct(grads[k]);
    const auto m_hat = m.array() / correction1;
    const auto v_hat = v.array() / correction2;
    params[k].value->array() -= c.lr * m_hat / (v_hat.sqrt() + c.epsilon);
  }
}

nlohmann::json matrix_to_json(const Matrix& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw Error("matrix payload size mismatch");
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = data[k++].get<double>();
  }
  return m;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json j;
  j["format"] = "xchan-checkpoint-1";
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& [name, m] : ckpt.tensors) tensors.push_back({{"name", name}, {"value", matrix_to_json(m)}});
  j["tensors"] = tensors;
  const auto& opt = ckpt.optimizer;
  nlohmann::json moments = nlohmann::json::array();
  for (std::size_t k = 0; k < opt.first_moment.size(); ++k) {
    moments.push_back({{"first", matrix_to_json(opt.first_moment[k])}, {"second", matrix_to_json(opt.second_moment[k])}});
  }
  j["optimizer"] = {{"lr", opt.config.lr},           {"beta1", opt.config.beta1},
                    {"beta2", opt.config.beta2},     {"epsilon", opt.config.epsilon},
                    {"step_count", opt.step_count},  {"moments", moments}};
  j["rng_state"] = ckpt.rng_state;
  j["extra"] = ckpt.extra;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact(path.string());
  const auto j = nlohmann::json::parse(in);
  if (j.value("format", "") != "xchan-checkpoint-1") throw Error("unrecognized checkpoint format in " + path.string());
  Checkpoint ckpt;
  for (const auto& t : j.at("tensors")) {
    ckpt.tensors.emplace_back(t.at("name").get<std::string>(), matrix_from_json(t.at("value")));
  }
  const auto& opt = j.at("optimizer");
  ckpt.optimizer.config = {opt.at("lr").get<double>(), opt.at("beta1").get<double>(), opt.at("beta2").get<double>(),
                           opt.at("epsilon").get<double>()};
  ckpt.optimizer.step_count = opt.at("step_count").get<std::int64_t>();
  for (const auto& m : opt.at("moments")) {
    ckpt.optimizer.first_moment.push_back(matrix_from_json(m.at("first")));
    ckpt.optimizer.second_moment.push_back(matrix_from_json(m.at("second")));
  }
  ckpt.rng_state = j.at("rng_state").get<std::string>();
  ckpt.extra = j.value("extra", nlohmann::json::object());
  return ckpt;
}

}  // namespace xchan
