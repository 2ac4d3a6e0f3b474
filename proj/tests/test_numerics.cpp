#include <doctest.h>

#include <cmath>
#include <limits>

#include "test_support.hpp"
#include "xchan/errors.hpp"
#include "xchan/numerics.hpp"

using namespace xchan;
using xchan::testing::TempDir;

TEST_CASE("bilinear logit") {
  const Matrix I = Matrix::Identity(2, 2);
  CHECK(bilinear_logit(Vector::Unit(2, 0), I, Vector::Unit(2, 0)) == 1.0);
  CHECK(std::exp(bilinear_logit(Vector::Unit(2, 0), I, Vector::Unit(2, 0))) == doctest::Approx(2.71828).epsilon(1e-5));
  CHECK(bilinear_logit(Vector::Unit(2, 0), Matrix::Zero(2, 2), Vector::Unit(2, 1)) == 0.0);
  Vector x(2), e(2);
  x << 1, 2;
  e << 3, 4;
  CHECK(bilinear_logit(x, I, e) == 11.0);
  CHECK_THROWS_AS(bilinear_logit(Vector::Zero(3), I, e), InvalidInput);
}

TEST_CASE("log_softmax") {
  const auto u = log_softmax(std::vector<double>{0, 0, 0});
  for (double v : u) CHECK(v == doctest::Approx(-std::log(3.0)).epsilon(1e-15));
  const auto big = log_softmax(std::vector<double>{1000, 0});
  CHECK(big[0] == doctest::Approx(0.0));
  CHECK(big[1] == doctest::Approx(-1000.0));
  CHECK(log_softmax(std::vector<double>{4.2}) == std::vector<double>{0.0});
  CHECK_THROWS_AS(log_softmax(std::vector<double>{}), InvalidInput);
  CHECK(log_sum_exp(std::vector<double>{1000, 1000}) == doctest::Approx(1000 + std::log(2.0)));
}

TEST_CASE("log_softmax properties") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + rng.below(10));
    for (auto& x : v) x = rng.normal(0, 20);
    const double c = rng.normal(0, 100);
    auto shifted = v;
    for (auto& x : shifted) x += c;
    const auto a = log_softmax(v);
    const auto b = log_softmax(shifted);
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-9));
      total += std::exp(a[i]);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("column log-softmax normalizes columns") {
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const Matrix l = log_softmax_columns(m);
  for (Eigen::Index c = 0; c < 3; ++c) CHECK(l.col(c).array().exp().sum() == doctest::Approx(1.0));
  CHECK(l(0, 0) == doctest::Approx(-std::log(1 + std::exp(3.0))));
}

TEST_CASE("cross-entropy gradient matches finite differences") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = static_cast<Eigen::Index>(1 + rng.below(8));
    const auto n = static_cast<Eigen::Index>(1 + rng.below(8));
    auto model = LinearPredictor::glorot(d, 3, rng);
    model.bias = Matrix::Random(1, 3);
    Matrix inputs(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) inputs(i, j) = rng.normal();
    }
    std::vector<int> labels;
    for (Eigen::Index i = 0; i < n; ++i) labels.push_back(static_cast<int>(rng.below(3)));
    CHECK(xchan::testing::cross_entropy_gradient_error(model, inputs, labels) < 1e-4);
  }
}

TEST_CASE("cross-entropy of uniform logits") {
  LinearPredictor model{Matrix::Zero(2, 3), Matrix::Zero(1, 3)};
  const Matrix inputs = Matrix::Ones(4, 2);
  const std::vector<int> labels{0, 1, 2, 1};
  CHECK(cross_entropy(model, inputs, labels) == doctest::Approx(std::log(3.0)));
  CHECK_THROWS_AS(cross_entropy(model, inputs, std::vector<int>{0, 1, 5, 1}), InvalidInput);
}

TEST_CASE("adam first step and zero gradients") {
  Matrix w = Matrix::Constant(1, 1, 0.5);
  const std::vector<NamedParam> params{{"w", &w}};
  auto state = make_adam_state(params, {1e-3, 0.9, 0.999, 1e-8});
  adam_step(params, std::vector<Matrix>{Matrix::Constant(1, 1, 1.0)}, state);
  CHECK(std::abs(w(0, 0) - 0.5) == doctest::Approx(1e-3).epsilon(1e-6));
  CHECK(state.step_count == 1);

  Matrix z = Matrix::Constant(2, 2, 3.0);
  const std::vector<NamedParam> zp{{"z", &z}};
  auto zs = make_adam_state(zp, {});
  adam_step(zp, std::vector<Matrix>{Matrix::Zero(2, 2)}, zs);
  CHECK(z == Matrix::Constant(2, 2, 3.0));
  CHECK(zs.step_count == 1);
}

TEST_CASE("adam rejects non-finite gradients by name") {
  Matrix a = Matrix::Ones(1, 2), b = Matrix::Ones(2, 1);
  const std::vector<NamedParam> params{{"alpha", &a}, {"beta", &b}};
  auto state = make_adam_state(params, {});
  Matrix bad = Matrix::Ones(2, 1);
  bad(1, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    adam_step(params, std::vector<Matrix>{Matrix::Ones(1, 2), bad}, state);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("beta") != std::string::npos);
  }
  CHECK(a == Matrix::Ones(1, 2));
  CHECK(state.step_count == 0);
  CHECK_THROWS_AS(adam_step(params, std::vector<Matrix>{Matrix::Ones(1, 2)}, state), InvalidInput);
  CHECK_THROWS_AS(adam_step(params, std::vector<Matrix>{Matrix::Ones(2, 2), Matrix::Ones(2, 1)}, state),
                  InvalidInput);
}

namespace {

// A fixed stochastic objective: gradient of |W - target|^2 plus seeded noise.
Matrix noisy_grad(const Matrix& w, Rng& rng) {
  Matrix g = 2.0 * (w.array() - 1.5).matrix();
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] += rng.normal(0, 0.3);
  return g;
}

}  // namespace

TEST_CASE("checkpoint resumes bit-exactly") {
  TempDir dir;
  const Matrix w0 = Matrix::Random(3, 2);

  Matrix full = w0;
  {
    const std::vector<NamedParam> params{{"W", &full}};
    auto state = make_adam_state(params, {1e-2});
    Rng rng(9);
    for (int s = 0; s < 40; ++s) adam_step(params, std::vector<Matrix>{noisy_grad(full, rng)}, state);
  }

  Matrix half = w0;
  {
    const std::vector<NamedParam> params{{"W", &half}};
    auto state = make_adam_state(params, {1e-2});
    Rng rng(9);
    for (int s = 0; s < 17; ++s) adam_step(params, std::vector<Matrix>{noisy_grad(half, rng)}, state);
    save_checkpoint(dir.path() / "ckpt.json", {{{"W", half}}, state, rng.state(), {{"epoch", 1}}});
  }

  const auto ck = load_checkpoint(dir.path() / "ckpt.json");
  REQUIRE(ck.tensors.size() == 1);
  CHECK(ck.tensors[0].first == "W");
  CHECK(ck.extra.at("epoch") == 1);
  Matrix resumed = ck.tensors[0].second;
  auto state = ck.optimizer;
  CHECK(state.step_count == 17);
  Rng rng;
  rng.restore(ck.rng_state);
  const std::vector<NamedParam> params{{"W", &resumed}};
  for (int s = 17; s < 40; ++s) adam_step(params, std::vector<Matrix>{noisy_grad(resumed, rng)}, state);
  CHECK(resumed == full);

  CHECK_THROWS_AS(load_checkpoint(dir.path() / "none.json"), MissingArtifact);
}

TEST_CASE("rng state round trips mid-normal") {
  Rng a(77);
  a.normal();  // leaves a cached spare
  Rng b;
  b.restore(a.state());
  for (int i = 0; i < 10; ++i) CHECK(a.normal() == b.normal());
}

TEST_CASE("glorot init bounds") {
  Rng rng(1);
  const auto c = BilinearCritic::glorot(8, 4, rng);
  const double bound = std::sqrt(6.0 / 12.0);
  CHECK(c.weight.rows() == 8);
  CHECK(c.weight.cols() == 4);
  CHECK(c.weight.cwiseAbs().maxCoeff() <= bound);
  Rng again(1);
  CHECK(BilinearCritic::glorot(8, 4, again).weight == c.weight);
}
