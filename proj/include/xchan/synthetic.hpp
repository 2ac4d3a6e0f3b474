#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "xchan/mi_estimators.hpp"

namespace xchan {

// rho such that d independent coordinate pairs with correlation rho carry
// `mi` nats: rho = sqrt(1 - exp(-2 mi / d)).
double rho_for_mi(double mi, Eigen::Index dim);

// -(d/2) ln(1 - rho^2)
double gaussian_mi(double rho, Eigen::Index dim);

// x ~ N(0, I_d), e = rho x + sqrt(1 - rho^2) z with z ~ N(0, I_d).
struct GaussianScenario {
  Eigen::Index dim = 16;
  double target_mi = 1.0;
  std::size_t n_samples = 10000;
  std::uint64_t seed = 0;

  double rho() const { return rho_for_mi(target_mi, dim); }
  double analytic_mi() const { return gaussian_mi(rho(), dim); }
};

PairedData sample_scenario(const GaussianScenario& scenario);

// Trains on the scenario (seeded by `seed`) and returns a dataset estimate in
// nats. May throw NumericError on divergence.
using ScenarioEstimator = std::function<double(const GaussianScenario& scenario, std::uint64_t seed)>;

struct TrialResult {
  double target_mi = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  double estimate = 0.0;
  double squared_error = 0.0;
};

struct ScenarioSummary {
  double target_mi = 0.0;
  std::size_t succeeded = 0;
  double mean_estimate = 0.0;
  double variance = 0.0;  // across trials, population form
  double mse = 0.0;
};

struct ValidationReport {
  std::vector<TrialResult> trials;
  std::vector<ScenarioSummary> scenarios;
  double mse = 0.0;  // mean of the per-scenario MSEs
  std::size_t failed = 0;
};

// Trial seeds derive from `master_seed`, the scenario index and the trial
// index, so results do not depend on `threads`. Failed trials are recorded
// and excluded from the summaries.
ValidationReport validate_estimator(const ScenarioEstimator& estimator, std::span<const GaussianScenario> scenarios,
                                    int trials, std::uint64_t master_seed, unsigned threads = 1);

struct SyntheticProtocol {
  std::size_t n_validation = 2000;
  std::size_t n_eval = 2000;
};

// InfoNCE on a scenario: train on n_samples, select on a validation draw,
// report the mean batch estimate on a fresh evaluation draw.
ScenarioEstimator infonce_scenario_estimator(InfoNceConfig config, SyntheticProtocol protocol = {});
ScenarioEstimator alt_bound_scenario_estimator(AltTrainConfig config, SyntheticProtocol protocol = {});

// ---- seeded random search ---------------------------------------------------

struct SearchDimension {
  std::string name;
  std::vector<double> choices;  // discrete dimension when non-empty
  double lo = 0.0;               // otherwise log-uniform on [lo, hi]
  double hi = 0.0;

  static SearchDimension choice(std::string name, std::vector<double> values) {
    return {std::move(name), std::move(values), 0.0, 0.0};
  }
  static SearchDimension log_uniform(std::string name, double lo, double hi) { return {std::move(name), {}, lo, hi}; }
  bool discrete() const { return !choices.empty(); }
};

using SearchConfig = std::map<std::string, double>;

struct SearchTrial {
  SearchConfig config;
  double objective = 0.0;
  bool failed = false;
  std::string error;
};

struct SearchResult {
  SearchConfig best;
  double best_objective = 0.0;
  std::vector<SearchTrial> trace;
};

// Uniform sampling of `budget` configurations. A fully discrete space is
// sampled without replacement (so budget >= grid size is exhaustive);
// otherwise each draw is independent. Objective exceptions mark a trial as
// failed; if every trial fails a NumericError is thrown.
SearchResult random_search(std::span<const SearchDimension> space, int budget,
                           const std::function<double(const SearchConfig&)>& objective, std::uint64_t seed);

}  // namespace xchan
