#include <doctest.h>

#include <cmath>
#include <set>

#include "xchan/errors.hpp"
#include "xchan/synthetic.hpp"

using namespace xchan;

TEST_CASE("rho for a target MI") {
  CHECK(rho_for_mi(0.0, 16) == 0.0);
  CHECK(rho_for_mi(2.0, 16) == doctest::Approx(std::sqrt(1 - std::exp(-0.25))).epsilon(1e-15));
  CHECK(rho_for_mi(2.0, 16) == doctest::Approx(0.4704).epsilon(1e-4));
  CHECK(rho_for_mi(10.0, 1024) == doctest::Approx(0.1390).epsilon(1e-3));
  for (double mi : {0.1, 0.5, 1.0, 2.0, 7.5}) CHECK(gaussian_mi(rho_for_mi(mi, 16), 16) == doctest::Approx(mi));
  CHECK_THROWS_AS(rho_for_mi(-1.0, 16), InvalidInput);
  CHECK_THROWS_AS(rho_for_mi(1.0, 0), InvalidInput);
}

TEST_CASE("sampled scenario has the requested correlation") {
  const GaussianScenario scn{4, 1.0, 20000, 3};
  const auto d = sample_scenario(scn);
  CHECK(d.xs.rows() == 20000);
  CHECK(d.es.cols() == 4);
  for (Eigen::Index j = 0; j < 4; ++j) {
    const double r = (d.xs.col(j).array() * d.es.col(j).array()).mean();
    CHECK(std::abs(r - scn.rho()) < 0.03);
  }
  const auto again = sample_scenario(scn);
  CHECK(again.xs == d.xs);
  const auto zero = sample_scenario({4, 0.0, 20000, 4});
  CHECK(std::abs((zero.xs.col(0).array() * zero.es.col(0).array()).mean()) < 0.03);
}

TEST_CASE("validate_estimator arithmetic") {
  const std::vector<GaussianScenario> scenarios{{4, 2.0, 10, 0}, {4, 4.0, 10, 0}};
  const auto oracle = validate_estimator(
      [](const GaussianScenario& s, std::uint64_t) { return s.analytic_mi(); }, scenarios, 3, 1);
  CHECK(oracle.mse == doctest::Approx(0.0));
  CHECK(oracle.trials.size() == 6);

  const auto zero = validate_estimator([](const GaussianScenario&, std::uint64_t) { return 0.0; }, scenarios, 3, 1);
  CHECK(zero.mse == doctest::Approx(10.0));
  CHECK(zero.scenarios[1].mse == doctest::Approx(16.0));
}

TEST_CASE("validate_estimator records failures and is thread-independent") {
  const std::vector<GaussianScenario> scenarios{{4, 1.0, 10, 0}};
  auto flaky = [](const GaussianScenario&, std::uint64_t seed) {
    if (seed % 3 == 0) throw NumericError("diverged");
    return static_cast<double>(seed % 7) / 7.0;
  };
  const auto one = validate_estimator(flaky, scenarios, 12, 42, 1);
  const auto four = validate_estimator(flaky, scenarios, 12, 42, 4);
  REQUIRE(one.trials.size() == four.trials.size());
  for (std::size_t i = 0; i < one.trials.size(); ++i) {
    CHECK(one.trials[i].seed == four.trials[i].seed);
    CHECK(one.trials[i].failed == four.trials[i].failed);
    CHECK(one.trials[i].estimate == four.trials[i].estimate);
  }
  CHECK(one.failed + one.scenarios[0].succeeded == 12);
  CHECK(one.mse == four.mse);
  std::set<std::uint64_t> seeds;
  for (const auto& t : one.trials) seeds.insert(t.seed);
  CHECK(seeds.size() == 12);
}

TEST_CASE("random search") {
  const std::vector<SearchDimension> space{SearchDimension::choice("lr", {1e-3, 3e-4, 1e-4}),
                                           SearchDimension::choice("batch", {8, 16, 32, 64})};
  auto distance = [](const SearchConfig& c) {
    return std::abs(std::log10(c.at("lr")) - std::log10(3e-4)) + std::abs(c.at("batch") - 32.0);
  };

  const auto single = random_search(space, 1, distance, 5);
  CHECK(single.trace.size() == 1);
  CHECK(single.best == single.trace[0].config);

  const auto a = random_search(space, 6, distance, 9);
  const auto b = random_search(space, 6, distance, 9);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) CHECK(a.trace[i].config == b.trace[i].config);

  const auto full = random_search(space, 12, distance, 1);
  CHECK(full.best.at("lr") == 3e-4);
  CHECK(full.best.at("batch") == 32.0);
  CHECK(full.best_objective == doctest::Approx(0.0));
  std::set<SearchConfig> distinct;
  for (const auto& t : full.trace) distinct.insert(t.config);
  CHECK(distinct.size() == 12);
}

TEST_CASE("random search over a continuous range") {
  const std::vector<SearchDimension> space{SearchDimension::log_uniform("lr", 1e-6, 1e-2),
                                           SearchDimension::choice("batch", {4, 8, 16})};
  int calls = 0;
  const auto r = random_search(
      space, 20,
      [&](const SearchConfig& c) {
        if (++calls == 3) throw NumericError("diverged");
        return std::abs(std::log(c.at("lr")) - std::log(1e-4));
      },
      3);
  CHECK(r.trace.size() == 20);
  CHECK(r.trace[2].failed);
  for (const auto& t : r.trace) {
    CHECK(t.config.at("lr") >= 1e-6);
    CHECK(t.config.at("lr") <= 1e-2);
  }
  CHECK_THROWS_AS(random_search(space, 2, [](const SearchConfig&) -> double { throw NumericError("x"); }, 1),
                  NumericError);
  CHECK_THROWS_AS(random_search(space, 0, [](const SearchConfig&) { return 0.0; }, 1), InvalidInput);
}
