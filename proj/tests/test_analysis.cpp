#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "test_support.hpp"
#include "xchan/analysis.hpp"
#include "xchan/errors.hpp"

using namespace xchan;
namespace t = xchan::testing;

namespace {

std::vector<double> normals(Rng& rng, std::size_t n, double sd = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal(0.0, sd);
  return v;
}

// Coarse values so ties occur.
std::vector<double> rounded(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = std::round(rng.normal(0.0, 2.0));
  return v;
}

}  // namespace

TEST_CASE("incomplete beta and t distribution against Boost") {
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    const double a = 0.05 + rng.uniform() * 50, b = 0.05 + rng.uniform() * 50, x = rng.uniform();
    CHECK(std::abs(incomplete_beta(a, b, x) - boost::math::ibeta(a, b, x)) < 1e-10);
  }
  for (double dof : {1.0, 2.0, 3.5, 10.0, 58.3, 1999.0, 1e5}) {
    boost::math::students_t dist(dof);
    for (double tv : {-40.0, -7.0, -2.5, -1.0, -0.1, 0.0, 0.3, 1.96, 4.0, 12.0}) {
      CHECK(std::abs(student_t_cdf(tv, dof) - boost::math::cdf(dist, tv)) < 1e-10);
      const double p = 2 * boost::math::cdf(boost::math::complement(dist, std::abs(tv)));
      CHECK(t::relative_error(student_t_two_sided_p(tv, dof), p) < 1e-8);
    }
  }
  for (double f : {0.01, 0.5, 1.0, 3.0, 20.0}) {
    boost::math::fisher_f dist(3.0, 47.0);
    CHECK(std::abs(f_distribution_sf(f, 3.0, 47.0) - boost::math::cdf(boost::math::complement(dist, f))) < 1e-10);
  }
}

TEST_CASE("average ranks") {
  const std::vector<double> v{10, 20, 20, 5, 20};
  CHECK(average_ranks(v) == std::vector<double>{2, 4, 4, 1, 4});
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const auto r = rounded(rng, 1 + rng.below(30));
    CHECK(average_ranks(r) == t::oracle_ranks(r));
  }
}

TEST_CASE("spearman examples") {
  CHECK(spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{2, 4, 6, 9}).rho == doctest::Approx(1.0));
  CHECK(spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{9, 6, 4, 2}).rho == doctest::Approx(-1.0));
  const auto r = spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4});
  CHECK(r.rho == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(r.n == 4);
  CHECK(r.defined);
  const auto constant = spearman(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3});
  CHECK_FALSE(constant.defined);
  CHECK(std::isnan(constant.rho));
  CHECK_THROWS_AS(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2}), InvalidInput);
  CHECK_THROWS_AS(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2}), InvalidInput);
  CHECK_THROWS_AS(spearman(std::vector<double>{1, NAN, 3}, std::vector<double>{1, 2, 3}), InvalidInput);
}

TEST_CASE("spearman against the oracle and its invariances") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3 + rng.below(198);
    auto x = trial % 2 ? rounded(rng, n) : normals(rng, n);
    auto y = normals(rng, n);
    for (std::size_t i = 0; i < n; ++i) y[i] += 0.5 * x[i];
    const auto r = spearman(x, y);
    if (!r.defined) continue;
    const auto o = t::oracle_spearman(x, y);
    CHECK(std::abs(r.rho - o.rho) < 1e-9);
    CHECK(std::abs(r.p - o.p) < 1e-9);
    CHECK(spearman(y, x).rho == doctest::Approx(r.rho).epsilon(1e-12));
    auto mx = x;
    for (auto& v : mx) v = std::exp(v / 3.0) * 5.0 - 1.0;  // strictly increasing map
    CHECK(spearman(mx, y).rho == doctest::Approx(r.rho).epsilon(1e-12));
  }
}

TEST_CASE("explained variance examples") {
  const std::vector<double> f1{1, 2, 3, 4, 5}, f2{2, 0, 1, 5, 3};
  std::vector<double> y(5);
  for (std::size_t i = 0; i < 5; ++i) y[i] = 3 + 2 * f1[i] - f2[i];
  CHECK(explained_variance(y, {f1, f2}).percent == doctest::Approx(100.0));

  const std::vector<double> c(5, 7.0);
  const auto flat = explained_variance(std::vector<double>{1, 5, 2, 8, 3}, {c});
  CHECK(flat.percent == doctest::Approx(0.0));
  CHECK(flat.rank_deficient);

  const auto saturated = explained_variance(std::vector<double>{1.5, 4.0}, {{0.0, 1.0}});
  CHECK(saturated.percent == doctest::Approx(100.0));

  const auto constant_target = explained_variance(c, {f1});
  CHECK(constant_target.percent == 0.0);

  CHECK_THROWS_AS(explained_variance(std::vector<double>{1.0}, {{1.0}}), InvalidInput);
  CHECK_THROWS_AS(explained_variance(y, {{1, 2}}), InvalidInput);
}

TEST_CASE("explained variance against normal equations") {
  Rng rng(4);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t k = 1 + rng.below(4);
    const std::size_t n = k + 3 + rng.below(197);
    std::vector<std::vector<double>> features(k);
    for (auto& f : features) f = normals(rng, n);
    auto y = normals(rng, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) y[i] += 0.3 * static_cast<double>(j + 1) * features[j][i];
    }
    const auto fit = explained_variance(y, features);
    CHECK_FALSE(fit.rank_deficient);
    CHECK(std::abs(fit.percent / 100.0 - t::oracle_r_squared(y, features)) < 1e-9);

    // Affine maps of the features and target leave R^2 unchanged.
    auto moved = features;
    for (auto& f : moved) {
      for (auto& v : f) v = 4.0 * v - 11.0;
    }
    auto ty = y;
    for (auto& v : ty) v = -2.0 * v + 3.0;
    CHECK(explained_variance(ty, moved).percent == doctest::Approx(fit.percent).epsilon(1e-9));
  }
}

TEST_CASE("explained variance flags collinear designs") {
  Rng rng(5);
  const auto a = normals(rng, 40);
  auto b = a;
  for (auto& v : b) v = 2 * v + 1;
  const auto y = normals(rng, 40);
  const auto fit = explained_variance(y, {a, b}, {"a", "b"});
  CHECK(fit.rank_deficient);
  CHECK(fit.rank == 2);
  CHECK(fit.percent == doctest::Approx(explained_variance(y, {a}).percent).epsilon(1e-9));
  REQUIRE(fit.terms.size() == 2);
  CHECK(fit.terms[0].name == "a");
}

TEST_CASE("type-2 sums of squares") {
  Rng rng(6);
  const auto a = normals(rng, 60), b = normals(rng, 60);
  auto y = normals(rng, 60);
  for (std::size_t i = 0; i < 60; ++i) y[i] += a[i];
  const auto full = explained_variance(y, {a, b}, {"a", "b"});
  const auto only_b = explained_variance(y, {b});
  CHECK(full.terms[0].sum_sq == doctest::Approx(only_b.residual_ss - full.residual_ss).epsilon(1e-9));
  const double f = full.terms[0].sum_sq / (full.residual_ss / (60 - 3));
  CHECK(full.terms[0].f == doctest::Approx(f).epsilon(1e-9));
  boost::math::fisher_f dist(1.0, 57.0);
  CHECK(full.terms[0].p == doctest::Approx(boost::math::cdf(boost::math::complement(dist, f))).epsilon(1e-9));
  CHECK(full.terms[0].p < 1e-6);
}

TEST_CASE("t-test examples") {
  const std::vector<double> a{1.0, 2.5, 3.0, 0.2};
  const auto same = paired_ttest_bonferroni(a, a, 3);
  CHECK(same.t == 0.0);
  CHECK(same.raw_p == 1.0);
  CHECK(same.zero_variance);
  CHECK(bonferroni(0.01, 3) == doctest::Approx(0.03).epsilon(1e-15));
  CHECK(bonferroni(0.6, 3) == 1.0);

  Rng rng(7);
  const auto x = normals(rng, 2000), y = normals(rng, 2000);
  const auto r = paired_ttest_bonferroni(x, y, 1);
  CHECK(r.dof == 1999.0);

  std::vector<double> shifted = a;
  for (auto& v : shifted) v += 1.0;
  const auto inf = paired_ttest_bonferroni(shifted, a, 1);
  CHECK(std::isinf(inf.t));
  CHECK(inf.raw_p == 0.0);
  CHECK_THROWS_AS(paired_ttest_bonferroni(a, std::vector<double>{1, 2}, 1), InvalidInput);
  CHECK_THROWS_AS(paired_ttest_bonferroni(a, a, 0), InvalidInput);
}

TEST_CASE("paired t-test against the oracle") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(199);
    const auto a = normals(rng, n);
    auto b = normals(rng, n);
    for (auto& v : b) v += 0.1;
    const std::size_t m = 1 + rng.below(5);
    const auto r = paired_ttest_bonferroni(a, b, m);
    const auto o = t::oracle_paired_t(a, b);
    CHECK(std::abs(r.t - o.t) < 1e-9);
    CHECK(r.dof == o.dof);
    CHECK(std::abs(r.raw_p - o.p) < 1e-9);
    CHECK(std::abs(r.adj_p - std::min(1.0, o.p * static_cast<double>(m))) < 1e-9);
  }
}

TEST_CASE("welch t-test") {
  const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 4, 6, 8, 10, 12};
  const auto r = paired_ttest_bonferroni(a, b, 1, TTestKind::welch);
  const double va = 2.5 / 5, vb = 14.0 / 6;
  CHECK(r.t == doctest::Approx((3.0 - 7.0) / std::sqrt(va + vb)).epsilon(1e-12));
  CHECK(r.dof == doctest::Approx((va + vb) * (va + vb) / (va * va / 4 + vb * vb / 5)).epsilon(1e-12));
  boost::math::students_t dist(r.dof);
  CHECK(r.raw_p == doctest::Approx(2 * boost::math::cdf(dist, r.t)).epsilon(1e-9));
}

TEST_CASE("silhouette examples") {
  const std::vector<Point2> pairs{{0, 0}, {0, 0.1}, {10, 10}, {10, 10.1}};
  const std::vector<int> labels{0, 0, 1, 1};
  const double s = silhouette(pairs, labels);
  CHECK(s > 0.9);
  CHECK(s == doctest::Approx(t::oracle_silhouette(pairs, labels)).epsilon(1e-12));

  // Point 2 is a singleton and contributes 0.
  const std::vector<Point2> three{{0, 0}, {1, 0}, {5, 0}};
  const double s3 = silhouette(three, std::vector<int>{1, 1, 2});
  const double expected = ((5.0 - 1.0) / 5.0 + (4.0 - 1.0) / 4.0) / 3.0;
  CHECK(s3 == doctest::Approx(expected).epsilon(1e-15));

  CHECK_THROWS_AS(silhouette(std::vector<Point2>{{0, 0}, {1, 1}}, std::vector<int>{0, 1}), InvalidInput);
  CHECK_THROWS_AS(silhouette(three, std::vector<int>{1, 1, 1}), InvalidInput);
}

TEST_CASE("silhouette against the oracle") {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3 + rng.below(198);
    const int k = 2 + static_cast<int>(rng.below(3));
    std::vector<Point2> pts(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(i % static_cast<std::size_t>(k));
      pts[i] = {rng.normal(labels[i] * 1.5, 1.0), rng.normal()};
    }
    const double s = silhouette(pts, labels);
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
    CHECK(std::abs(s - t::oracle_silhouette(pts, labels)) < 1e-9);
  }
}

TEST_CASE("silhouette of shuffled labels on one blob") {
  Rng rng(10);
  std::vector<Point2> pts(300);
  for (auto& p : pts) p = {rng.normal(), rng.normal()};
  std::vector<int> labels(300);
  for (std::size_t i = 0; i < 300; ++i) labels[i] = static_cast<int>(i % 3);
  rng.shuffle(labels);
  CHECK(std::abs(silhouette(pts, labels)) <= 0.1);
}
