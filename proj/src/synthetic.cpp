#include "xchan/synthetic.hpp"

#include <cmath>
#include <future>
#include <limits>

#include "xchan/errors.hpp"
#include "xchan/random.hpp"

namespace xchan {

double rho_for_mi(double mi, Eigen::Index dim) {
  if (dim < 1) throw InvalidInput("rho_for_mi: dimension must be positive");
  if (mi < 0) throw InvalidInput("rho_for_mi: negative mutual information");
  return std::sqrt(-std::expm1(-2.0 * mi / static_cast<double>(dim)));
}

double gaussian_mi(double rho, Eigen::Index dim) {
  return -0.5 * static_cast<double>(dim) * std::log1p(-rho * rho);
}

PairedData sample_scenario(const GaussianScenario& scenario) {
  const double rho = scenario.rho();
  const double noise = std::sqrt(1.0 - rho * rho);
  const auto n = static_cast<Eigen::Index>(scenario.n_samples);
  PairedData data;
  data.xs.resize(n, scenario.dim);
  data.es.resize(n, scenario.dim);
  data.ids.reserve(scenario.n_samples);
  Rng rng(scenario.seed);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < scenario.dim; ++j) {
      const double x = rng.normal();
      const double z = rng.normal();
      data.xs(i, j) = x;
      data.es(i, j) = rho * x + noise * z;
    }
    data.ids.push_back("g" + std::to_string(i));
  }
  return data;
}

ValidationReport validate_estimator(const ScenarioEstimator& estimator, std::span<const GaussianScenario> scenarios,
                                    int trials, std::uint64_t master_seed, unsigned threads) {
  if (scenarios.empty()) throw InvalidInput("validate_estimator: no scenarios");
  if (trials < 1) throw InvalidInput("validate_estimator: need at least one trial");

  ValidationReport report;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    for (int t = 0; t < trials; ++t) {
      TrialResult r;
      r.target_mi = scenarios[s].target_mi;
      r.trial = t;
      r.seed = derive_seed(master_seed, (static_cast<std::uint64_t>(s) << 20) | static_cast<std::uint64_t>(t));
      report.trials.push_back(r);
    }
  }

  auto run = [&](TrialResult& r, const GaussianScenario& base) {
    GaussianScenario scn = base;
    scn.seed = r.seed;
    try {
      r.estimate = estimator(scn, r.seed);
      if (!std::isfinite(r.estimate)) throw NumericError("non-finite estimate");
      r.squared_error = (r.estimate - scn.analytic_mi()) * (r.estimate - scn.analytic_mi());
    } catch (const Error& e) {
      r.failed = true;
      r.error = e.what();
    }
  };

  const auto per_scenario = static_cast<std::size_t>(trials);
  const unsigned workers = std::max(1u, threads);
  for (std::size_t first = 0; first < report.trials.size(); first += workers) {
    const auto last = std::min(report.trials.size(), first + workers);
    std::vector<std::future<void>> pending;
    for (auto k = first; k < last; ++k) {
      auto& r = report.trials[k];
      const auto& scn = scenarios[k / per_scenario];
      if (workers == 1) {
        run(r, scn);
      } else {
        pending.push_back(std::async(std::launch::async, [&run, &r, &scn] { run(r, scn); }));
      }
    }
    for (auto& f : pending) f.get();
  }

  double mse_sum = 0.0;
  std::size_t scored = 0;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    ScenarioSummary sum;
    sum.target_mi = scenarios[s].target_mi;
    double est_sum = 0.0, sq_sum = 0.0;
    for (std::size_t t = 0; t < per_scenario; ++t) {
      const auto& r = report.trials[s * per_scenario + t];
      if (r.failed) {
        ++report.failed;
        continue;
      }
      ++sum.succeeded;
      est_sum += r.estimate;
      sq_sum += r.squared_error;
    }
    if (sum.succeeded > 0) {
      const double k = static_cast<double>(sum.succeeded);
      sum.mean_estimate = est_sum / k;
      sum.mse = sq_sum / k;
      double var = 0.0;
      for (std::size_t t = 0; t < per_scenario; ++t) {
        const auto& r = report.trials[s * per_scenario + t];
        if (!r.failed) var += (r.estimate - sum.mean_estimate) * (r.estimate - sum.mean_estimate);
      }
      sum.variance = var / k;
      mse_sum += sum.mse;
      ++scored;
    } else {
      sum.mean_estimate = sum.mse = sum.variance = std::numeric_limits<double>::quiet_NaN();
    }
    report.scenarios.push_back(sum);
  }
  report.mse = scored > 0 ? mse_sum / static_cast<double>(scored) : std::numeric_limits<double>::quiet_NaN();
  return report;
}

namespace {

struct ScenarioDraws {
  PairedData train, validation, eval;
};

ScenarioDraws draw(const GaussianScenario& scn, const SyntheticProtocol& protocol, std::uint64_t seed) {
  auto part = [&](std::size_t n, std::uint64_t stream) {
    GaussianScenario s = scn;
    s.n_samples = n;
    s.seed = derive_seed(seed, stream);
    return sample_scenario(s);
  };
  return {part(scn.n_samples, 11), part(protocol.n_validation, 12), part(protocol.n_eval, 13)};
}

}  // namespace

ScenarioEstimator infonce_scenario_estimator(InfoNceConfig config, SyntheticProtocol protocol) {
  return [config, protocol](const GaussianScenario& scn, std::uint64_t seed) {
    const auto d = draw(scn, protocol, seed);
    const auto trained = train_infonce(d.train, d.validation, config, derive_seed(seed, 14));
    const auto batches = make_batches(d.eval, config.batch_size, derive_seed(seed, 15));
    return infonce_estimate(batches, trained.critic).dataset_nats;
  };
}

ScenarioEstimator alt_bound_scenario_estimator(AltTrainConfig config, SyntheticProtocol protocol) {
  return [config, protocol](const GaussianScenario& scn, std::uint64_t seed) {
    const auto d = draw(scn, protocol, seed);
    const auto trained = train_alt_bound(d.train, d.validation, config, derive_seed(seed, 14));
    const auto batches = make_batches(d.eval, config.batch_size, derive_seed(seed, 15));
    return alt_bound_estimate(batches, trained.critic, config.bound).dataset_nats;
  };
}

SearchResult random_search(std::span<const SearchDimension> space, int budget,
                           const std::function<double(const SearchConfig&)>& objective, std::uint64_t seed) {
  if (budget < 1) throw InvalidInput("random_search: budget must be at least 1");
  if (space.empty()) throw InvalidInput("random_search: empty search space");
  bool all_discrete = true;
  std::uint64_t grid = 1;
  for (const auto& dim : space) {
    if (dim.discrete()) {
      grid = grid > (1ull << 40) ? grid : grid * dim.choices.size();
    } else {
      all_discrete = false;
      if (!(dim.lo > 0 && dim.hi >= dim.lo)) throw InvalidInput("random_search: bad log-uniform range for " + dim.name);
    }
  }

  Rng rng(seed);
  std::vector<SearchConfig> configs;
  if (all_discrete) {
    // Sample grid cells without replacement (partial Fisher-Yates over
    // mixed-radix indices, tracked sparsely).
    const auto count = std::min<std::uint64_t>(static_cast<std::uint64_t>(budget), grid);
    std::map<std::uint64_t, std::uint64_t> swapped;
    auto at = [&](std::uint64_t i) {
      auto it = swapped.find(i);
      return it == swapped.end() ? i : it->second;
    };
    for (std::uint64_t k = 0; k < count; ++k) {
      const auto j = k + rng.below(grid - k);
      const auto cell = at(j);
      swapped[j] = at(k);
      swapped[k] = cell;
      SearchConfig cfg;
      auto rem = cell;
      for (const auto& dim : space) {
        cfg[dim.name] = dim.choices[rem % dim.choices.size()];
        rem /= dim.choices.size();
      }
      configs.push_back(std::move(cfg));
    }
  } else {
    for (int k = 0; k < budget; ++k) {
      SearchConfig cfg;
      for (const auto& dim : space) {
        cfg[dim.name] = dim.discrete() ? dim.choices[rng.below(dim.choices.size())]
                                       : std::exp(rng.uniform(std::log(dim.lo), std::log(dim.hi)));
      }
      configs.push_back(std::move(cfg));
    }
  }

  SearchResult result;
  bool found = false;
  for (auto& cfg : configs) {
    SearchTrial trial;
    trial.config = cfg;
    try {
      trial.objective = objective(cfg);
      if (!std::isfinite(trial.objective)) throw NumericError("non-finite objective");
    } catch (const Error& e) {
      trial.failed = true;
      trial.error = e.what();
    }
    if (!trial.failed && (!found || trial.objective < result.best_objective)) {
      found = true;
      result.best = cfg;
      result.best_objective = trial.objective;
    }
    result.trace.push_back(std::move(trial));
  }
  if (!found) throw NumericError("random_search: every evaluation failed");
  return result;
}

}  // namespace xchan
