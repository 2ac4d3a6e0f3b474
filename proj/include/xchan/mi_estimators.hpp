#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xchan/numerics.hpp"

namespace xchan {

// Aligned rows (x_i, e_i) with their instance ids.
struct PairedData {
  Matrix xs;
  Matrix es;
  std::vector<std::string> ids;

  Eigen::Index size() const { return xs.rows(); }
  void validate() const;
};

using MiBatch = PairedData;

enum class MiEstimator { infonce, mine, nwj, smile };
std::string_view to_string(MiEstimator kind);
std::optional<MiEstimator> parse_estimator(std::string_view text);

struct PointwiseScore {
  std::string id;
  double nats = 0.0;
};

struct MiEstimate {
  MiEstimator estimator = MiEstimator::infonce;
  double dataset_nats = 0.0;  // mean of per-batch estimates
  std::vector<double> batch_estimates;
  std::vector<PointwiseScore> pointwise;  // batch order
  std::size_t batch_size = 0;
  std::vector<double> training_history;
};

// Full batches of `batch_size` rows; the trailing partial batch is dropped.
// With a seed the rows are shuffled first, otherwise input order is kept.
std::vector<MiBatch> make_batches(const PairedData& data, std::size_t batch_size,
                                  std::optional<std::uint64_t> shuffle_seed = std::nullopt);

// ---- InfoNCE --------------------------------------------------------------

// Logits S[j, i] = x_j^T W e_i for every candidate x_j and explanan e_i.
Matrix infonce_logits(const MiBatch& batch, const BilinearCritic& critic);

// L_N: mean over i of -log softmax_j(S[:, i])[i], the cross-entropy of
// picking x_i for e_i among the batch. Nonnegative.
double infonce_batch_loss(const MiBatch& batch, const BilinearCritic& critic);

struct LossAndGrad {
  double loss = 0.0;
  Matrix grad;
};
LossAndGrad infonce_loss_with_grad(const MiBatch& batch, const BilinearCritic& critic);

// Per batch: ln N - L_N. Pointwise for instance i: ln N + log softmax of its
// own pair within its batch; these average to the batch estimate.
MiEstimate infonce_estimate(std::span<const MiBatch> batches, const BilinearCritic& critic);

struct InfoNceConfig {
  double lr = 1e-4;
  std::size_t batch_size = 64;
  int epochs = 10;
  // Validation cadence in optimizer steps; 0 evaluates once per epoch.
  int eval_every = 0;
};

struct TrainedCritic {
  BilinearCritic critic;                 // lowest-validation-loss checkpoint
  std::vector<double> train_history;     // loss per optimizer step
  std::vector<double> validation_history;
  double best_validation_loss = 0.0;
  std::int64_t best_step = 0;
};

// Minimizes L_N with Adam; validation batches have a fixed, seeded
// composition. Throws NumericError (history attached) if the loss diverges.
TrainedCritic train_infonce(const PairedData& train, const PairedData& validation, const InfoNceConfig& config,
                            std::uint64_t seed);

// ---- Alternative bounds ---------------------------------------------------

struct AltBound {
  MiEstimator kind = MiEstimator::mine;  // mine, nwj or smile
  double tau = std::numeric_limits<double>::infinity();  // smile clip
};

// mine:  mean(joint) - ln mean(exp(marginal))        (Donsker-Varadhan)
// nwj:   mean(joint) - mean(exp(marginal - 1))
// smile: DV with exp(marginal) clipped to [e^-tau, e^tau]
double alt_bound(AltBound bound, std::span<const double> joint, std::span<const double> marginal);

// Critic T(x, e) = x^T W e + b.
struct AltCritic {
  Matrix weight;
  double bias = 0.0;
};

// Batch scores: diagonal pairs are joint samples, off-diagonal pairs
// marginal ones. Returns the bound and its gradient w.r.t. (W, b).
struct AltBoundGrad {
  double bound = 0.0;
  Matrix grad_weight;
  double grad_bias = 0.0;
};
AltBoundGrad alt_bound_with_grad(AltBound bound, const MiBatch& batch, const AltCritic& critic);

struct AltTrainConfig {
  AltBound bound;
  double lr = 1e-3;
  std::size_t batch_size = 64;
  int epochs = 10;
};

struct TrainedAltCritic {
  AltCritic critic;
  std::vector<double> train_history;  // negated bound per step
  double best_validation_bound = 0.0;
};

TrainedAltCritic train_alt_bound(const PairedData& train, const PairedData& validation, const AltTrainConfig& config,
                                 std::uint64_t seed);

MiEstimate alt_bound_estimate(std::span<const MiBatch> batches, const AltCritic& critic, AltBound bound);

}  // namespace xchan
