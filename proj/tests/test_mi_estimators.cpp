#include <doctest.h>

#include <cmath>
#include <numeric>

#include "test_support.hpp"
#include "xchan/errors.hpp"
#include "xchan/mi_estimators.hpp"
#include "xchan/synthetic.hpp"

using namespace xchan;
using xchan::testing::random_batch;

namespace {

MiBatch identity_batch(Eigen::Index n) {
  MiBatch b{Matrix::Identity(n, n), Matrix::Identity(n, n), {}};
  for (Eigen::Index i = 0; i < n; ++i) b.ids.push_back("i" + std::to_string(i));
  return b;
}

PairedData gaussian_pairs(std::size_t n, double rho, std::uint64_t seed, Eigen::Index d = 4) {
  Rng rng(seed);
  PairedData p{Matrix(n, d), Matrix(n, d), {}};
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double x = rng.normal();
      p.xs(static_cast<Eigen::Index>(i), j) = x;
      p.es(static_cast<Eigen::Index>(i), j) = rho * x + std::sqrt(1 - rho * rho) * rng.normal();
    }
    p.ids.push_back("g" + std::to_string(i));
  }
  return p;
}

}  // namespace

TEST_CASE("infonce loss special cases") {
  Rng rng(1);
  const auto one = random_batch(rng, 1, 3, 2);
  CHECK(infonce_batch_loss(one, BilinearCritic{Matrix::Random(3, 2)}) == doctest::Approx(0.0));

  const auto b = random_batch(rng, 7, 3, 2);
  CHECK(infonce_batch_loss(b, BilinearCritic::zeros(3, 2)) == doctest::Approx(std::log(7.0)).epsilon(1e-14));

  // Logit matrix [[5,0],[0,5]].
  const auto two = identity_batch(2);
  const double expected = -std::log(std::exp(5.0) / (std::exp(5.0) + 1.0));
  CHECK(infonce_batch_loss(two, BilinearCritic{5.0 * Matrix::Identity(2, 2)}) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.00672).epsilon(1e-3));

  CHECK_THROWS_AS(infonce_batch_loss(b, BilinearCritic::zeros(2, 2)), InvalidInput);
}

TEST_CASE("infonce logits orientation") {
  Rng rng(2);
  const auto b = random_batch(rng, 4, 3, 2);
  const BilinearCritic c{Matrix::Random(3, 2)};
  const Matrix S = infonce_logits(b, c);
  for (Eigen::Index j = 0; j < 4; ++j) {
    for (Eigen::Index i = 0; i < 4; ++i) {
      CHECK(S(j, i) == doctest::Approx(bilinear_logit(b.xs.row(j).transpose(), c.weight, b.es.row(i).transpose())));
    }
  }
}

TEST_CASE("infonce gradient matches finite differences") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const auto n = static_cast<Eigen::Index>(1 + rng.below(8));
    const auto dx = static_cast<Eigen::Index>(1 + rng.below(8));
    const auto de = static_cast<Eigen::Index>(1 + rng.below(8));
    const auto b = random_batch(rng, n, dx, de);
    const auto c = BilinearCritic::glorot(dx, de, rng);
    CHECK(xchan::testing::infonce_gradient_error(b, c) < 1e-4);
  }
}

TEST_CASE("make_batches drops the trailing partial batch") {
  const auto data = gaussian_pairs(10, 0.5, 1);
  const auto batches = make_batches(data, 4);
  REQUIRE(batches.size() == 2);
  CHECK(batches[0].ids.front() == "g0");
  CHECK(batches[1].ids.back() == "g7");
  const auto a = make_batches(data, 4, 99);
  const auto b = make_batches(data, 4, 99);
  CHECK(a[0].ids == b[0].ids);
  CHECK(a[0].xs == b[0].xs);
  CHECK(make_batches(data, 11).empty());
  CHECK_THROWS_AS(make_batches(data, 0), InvalidInput);
  CHECK_THROWS_AS(infonce_estimate(make_batches(data, 11), BilinearCritic::zeros(4, 4)), InvalidInput);
}

TEST_CASE("infonce estimate invariants") {
  const auto data = gaussian_pairs(200, 0.8, 4);
  const auto batches = make_batches(data, 16, 5);
  Rng rng(6);
  const auto critic = BilinearCritic{3.0 * BilinearCritic::glorot(4, 4, rng).weight + 2.0 * Matrix::Identity(4, 4)};
  const auto est = infonce_estimate(batches, critic);
  CHECK(est.batch_size == 16);
  REQUIRE(est.pointwise.size() == 16 * batches.size());
  const double cap = std::log(16.0);
  for (const auto& p : est.pointwise) CHECK(p.nats <= cap);
  for (std::size_t k = 0; k < batches.size(); ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 16; ++i) mean += est.pointwise[k * 16 + i].nats;
    mean /= 16.0;
    CHECK(std::abs(mean - est.batch_estimates[k]) < 1e-9);
    CHECK(std::abs(est.batch_estimates[k] - (cap - infonce_batch_loss(batches[k], critic))) < 1e-12);
  }
  const double avg =
      std::accumulate(est.batch_estimates.begin(), est.batch_estimates.end(), 0.0) / batches.size();
  CHECK(est.dataset_nats == doctest::Approx(avg).epsilon(1e-14));

  const auto zero = infonce_estimate(batches, BilinearCritic::zeros(4, 4));
  CHECK(std::abs(zero.dataset_nats) < 1e-12);
}

TEST_CASE("separable pairs saturate at ln N") {
  const auto b = identity_batch(64);
  const auto est = infonce_estimate(std::vector<MiBatch>{b}, BilinearCritic{40.0 * Matrix::Identity(64, 64)});
  CHECK(est.dataset_nats == doctest::Approx(std::log(64.0)).epsilon(1e-9));
  CHECK(std::log(64.0) == doctest::Approx(4.1589).epsilon(1e-4));
}

TEST_CASE("independent pairs estimate near zero") {
  const auto train = gaussian_pairs(64 * 20, 0.0, 7);
  const auto val = gaussian_pairs(64 * 10, 0.0, 8);
  const auto test = gaussian_pairs(64 * 60, 0.0, 9);
  const auto trained = train_infonce(train, val, {1e-2, 64, 10, 0}, 10);
  const auto est = infonce_estimate(make_batches(test, 64, 11), trained.critic);
  CHECK(est.batch_estimates.size() >= 50);
  CHECK(std::abs(est.dataset_nats) <= 0.1);
}

TEST_CASE("train_infonce is deterministic and learns") {
  const auto train = gaussian_pairs(2000, 0.8, 12);
  const auto val = gaussian_pairs(512, 0.8, 13);
  const InfoNceConfig cfg{5e-3, 64, 5, 0};
  const auto a = train_infonce(train, val, cfg, 3);
  const auto b = train_infonce(train, val, cfg, 3);
  CHECK(a.train_history == b.train_history);
  CHECK(a.critic.weight == b.critic.weight);
  CHECK(a.validation_history.size() == 6);  // initial critic plus one per epoch
  CHECK(a.best_validation_loss < std::log(64.0) - 0.5);
  CHECK_THROWS_AS(train_infonce(train, val, {0.0, 64, 5, 0}, 3), InvalidInput);
}

TEST_CASE("infonce divergence reports history") {
  auto train = gaussian_pairs(256, 0.9, 14);
  const auto val = gaussian_pairs(128, 0.9, 15);
  train.xs *= 1e300;
  train.es *= 1e300;
  try {
    train_infonce(train, val, {1e-1, 64, 2, 0}, 1);
    FAIL("expected NumericError");
  } catch (const NumericError&) {
  }
}

TEST_CASE("correlated Gaussians at MI 2 give a near-tight lower bound") {
  const auto train = sample_scenario({16, 2.0, 10000, 101});
  const auto val = sample_scenario({16, 2.0, 2000, 102});
  const auto trained = train_infonce(train, val, {5e-3, 256, 20, 0}, 103);
  const double val_estimate = std::log(256.0) - trained.best_validation_loss;
  CHECK(val_estimate >= 1.5);
  CHECK(val_estimate <= 2.0);
}

TEST_CASE("infonce variance across seeds is small") {
  const auto train = sample_scenario({16, 1.0, 4096, 201});
  const auto val = sample_scenario({16, 1.0, 1024, 202});
  const auto test = sample_scenario({16, 1.0, 4096, 203});
  std::vector<double> estimates;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto trained = train_infonce(train, val, {5e-3, 64, 5, 0}, seed);
    estimates.push_back(infonce_estimate(make_batches(test, 64, seed), trained.critic).dataset_nats);
  }
  const double mean = std::accumulate(estimates.begin(), estimates.end(), 0.0) / 5.0;
  double var = 0.0;
  for (double e : estimates) var += (e - mean) * (e - mean);
  CHECK(var / 4.0 < 0.05);
}

TEST_CASE("alternative bounds") {
  const std::vector<double> c(5, 0.7);
  CHECK(alt_bound({MiEstimator::mine}, c, c) == doctest::Approx(0.0).epsilon(1e-15));
  const std::vector<double> ones(5, 1.0);
  CHECK(alt_bound({MiEstimator::nwj}, ones, ones) == doctest::Approx(0.0).epsilon(1e-15));

  const std::vector<double> joint{1.0, 2.0, 0.5}, marginal{-1.0, 0.3, 4.0, 2.0};
  const double mine = alt_bound({MiEstimator::mine}, joint, marginal);
  const double m = (std::exp(-1.0) + std::exp(0.3) + std::exp(4.0) + std::exp(2.0)) / 4.0;
  CHECK(mine == doctest::Approx(3.5 / 3.0 - std::log(m)));
  CHECK(alt_bound({MiEstimator::smile, 1e6}, joint, marginal) == doctest::Approx(mine).epsilon(1e-14));
  CHECK(alt_bound({MiEstimator::smile, 1.0}, joint, marginal) > mine);
  CHECK_THROWS_AS(alt_bound({MiEstimator::mine}, {}, marginal), InvalidInput);
  CHECK_THROWS_AS(alt_bound({MiEstimator::infonce}, joint, marginal), InvalidInput);
  CHECK_THROWS_AS(alt_bound({MiEstimator::nwj}, joint, std::vector<double>{1e6}), NumericError);
}

TEST_CASE("alternative bound gradients") {
  Rng rng(31);
  for (auto kind : {MiEstimator::mine, MiEstimator::nwj}) {
    for (int trial = 0; trial < 5; ++trial) {
      const auto b = random_batch(rng, 2 + static_cast<Eigen::Index>(rng.below(6)), 3, 2);
      AltCritic c{0.3 * Matrix::Random(3, 2), 0.2};
      const auto g = alt_bound_with_grad({kind}, b, c);
      const double h = 1e-6;
      for (Eigen::Index p = 0; p < 3; ++p) {
        for (Eigen::Index q = 0; q < 2; ++q) {
          auto up = c, down = c;
          up.weight(p, q) += h;
          down.weight(p, q) -= h;
          const double numeric =
              (alt_bound_with_grad({kind}, b, up).bound - alt_bound_with_grad({kind}, b, down).bound) / (2 * h);
          CHECK(xchan::testing::relative_error(g.grad_weight(p, q), numeric) < 1e-4);
        }
      }
      auto up = c, down = c;
      up.bias += h;
      down.bias -= h;
      const double numeric =
          (alt_bound_with_grad({kind}, b, up).bound - alt_bound_with_grad({kind}, b, down).bound) / (2 * h);
      CHECK(std::abs(g.grad_bias - numeric) < 1e-6);
    }
  }
}

TEST_CASE("estimator names") {
  CHECK(parse_estimator("smile") == MiEstimator::smile);
  CHECK(to_string(MiEstimator::infonce) == "infonce");
  CHECK_FALSE(parse_estimator("club").has_value());
}
