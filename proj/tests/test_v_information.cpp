#include <doctest.h>

#include <cmath>
#include <numeric>

#include "test_support.hpp"
#include "xchan/errors.hpp"
#include "xchan/v_information.hpp"

using namespace xchan;

namespace {

std::vector<int> cycled_labels(std::size_t n, const std::vector<int>& pattern) {
  std::vector<int> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(pattern[i % pattern.size()]);
  return out;
}

Matrix one_hot(const std::vector<int>& labels, double scale) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), 3);
  for (std::size_t i = 0; i < labels.size(); ++i) m(static_cast<Eigen::Index>(i), labels[i]) = scale;
  return m;
}

std::vector<std::string> ids_for(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("v" + std::to_string(i));
  return ids;
}

}  // namespace

TEST_CASE("null input") {
  const auto a = make_null_input(5, 1536);
  const auto b = make_null_input(5, 1536);
  CHECK(a.values.size() == 1536);
  CHECK(a.values == b.values);
  CHECK(a.stddev == doctest::Approx(0.1));
  CHECK(make_null_input(6, 1536).values != a.values);

  const auto big = make_null_input(9, 100000);
  const double mean = big.values.mean();
  const double sd = std::sqrt((big.values.array() - mean).square().sum() / (big.values.size() - 1));
  CHECK(std::abs(sd - 0.1) <= 0.005);

  CHECK(make_null_input(5, 4, 0.01, NullScale::stddev).stddev == doctest::Approx(0.01));
  CHECK_THROWS_AS(make_null_input(5, 0), InvalidInput);

  const Matrix d = null_design(a, 3);
  CHECK(d.rows() == 3);
  CHECK(d.row(2).transpose() == a.values);
}

TEST_CASE("null fit converges to the label entropy") {
  const auto null = make_null_input(1, 8);
  const PredictorConfig cfg{5e-2, 16, 40};

  const auto uniform = cycled_labels(600, {0, 1, 2});
  const auto fit = fit_predictor(null_design(null, 600), uniform, null_design(null, 300),
                                 cycled_labels(300, {0, 1, 2}), cfg, 2);
  CHECK(fit.best_validation_nll == doctest::Approx(std::log(3.0)).epsilon(1e-3));

  const auto skewed = cycled_labels(800, {0, 0, 1, 2});
  const auto fit2 = fit_predictor(null_design(null, 800), skewed, null_design(null, 400),
                                  cycled_labels(400, {0, 0, 1, 2}), cfg, 3);
  const double h = -(0.5 * std::log(0.5) + 0.5 * std::log(0.25));
  CHECK(h == doctest::Approx(1.0397).epsilon(1e-4));
  CHECK(fit2.best_validation_nll == doctest::Approx(h).epsilon(1e-3));
}

TEST_CASE("scaled one-hot explanans are separable") {
  const auto labels = cycled_labels(300, {0, 1, 2});
  const auto fit = fit_predictor(one_hot(labels, 10.0), labels, one_hot(labels, 10.0), labels, {5e-2, 16, 20}, 4);
  CHECK(fit.best_validation_nll < 0.05);
  CHECK_FALSE(fit.single_class);
}

TEST_CASE("v-information calibration") {
  const auto labels = cycled_labels(600, {0, 1, 2});
  const auto test_labels = cycled_labels(300, {2, 0, 1});
  const auto null = make_null_input(7, 3);
  const PredictorConfig cfg{5e-2, 16, 30};
  const auto null_fit =
      fit_predictor(null_design(null, 600), labels, null_design(null, 300), test_labels, cfg, 1);
  const auto cond_fit = fit_predictor(one_hot(labels, 1.0), labels, one_hot(test_labels, 1.0), test_labels, cfg, 2);
  const auto est = v_information(null_fit.model, cond_fit.model, test_labels, null_design(null, 300),
                                 one_hot(test_labels, 1.0), ids_for(300));
  CHECK(std::abs(est.v_information - std::log(3.0)) <= 0.05);
  CHECK(est.v_information == est.h_entropy - est.h_conditional);
  double mean = 0.0;
  for (const auto& p : est.pointwise) mean += p.nats;
  mean /= static_cast<double>(est.pointwise.size());
  CHECK(std::abs(mean - est.v_information) < 1e-9);
  CHECK(est.pointwise[4].id == "v4");
}

TEST_CASE("independent explanans carry no information") {
  Rng rng(8);
  auto noise = [&](Eigen::Index n) {
    Matrix m(n, 6);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
  };
  const auto labels = cycled_labels(1500, {0, 1, 2});
  const auto val_labels = cycled_labels(600, {1, 2, 0});
  const auto test_labels = cycled_labels(600, {2, 1, 0});
  const Matrix train_e = noise(1500), val_e = noise(600), test_e = noise(600);
  const auto null = make_null_input(9, 6);
  const PredictorConfig cfg{1e-2, 16, 10};
  const auto null_fit = fit_predictor(null_design(null, 1500), labels, null_design(null, 600), val_labels, cfg, 1);
  const auto cond_fit = fit_predictor(train_e, labels, val_e, val_labels, cfg, 2);
  const auto est =
      v_information(null_fit.model, cond_fit.model, test_labels, null_design(null, 600), test_e, ids_for(600));
  CHECK(std::abs(est.v_information) <= 0.05);
}

TEST_CASE("fit_predictor flags a single-class training set and validates shapes") {
  const std::vector<int> labels(20, 1);
  const Matrix inputs = Matrix::Ones(20, 2);
  const auto fit = fit_predictor(inputs, labels, inputs, labels, {1e-2, 4, 2}, 1);
  CHECK(fit.single_class);
  CHECK_THROWS_AS(fit_predictor(inputs, std::vector<int>(19, 1), inputs, labels, {}, 1), InvalidInput);
  CHECK_THROWS_AS(fit_predictor(inputs, labels, Matrix::Ones(20, 3), labels, {}, 1), InvalidInput);
  CHECK_THROWS_AS(v_information(fit.model, fit.model, labels, inputs, inputs, ids_for(3)), InvalidInput);
}

TEST_CASE("fit_predictor is deterministic under seed") {
  Rng rng(3);
  Matrix e(90, 4);
  for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = rng.normal();
  const auto labels = cycled_labels(90, {0, 1, 2});
  const auto a = fit_predictor(e, labels, e, labels, {1e-2, 8, 3}, 5);
  const auto b = fit_predictor(e, labels, e, labels, {1e-2, 8, 3}, 5);
  CHECK(a.train_history == b.train_history);
  CHECK(a.model.weights == b.model.weights);
}
