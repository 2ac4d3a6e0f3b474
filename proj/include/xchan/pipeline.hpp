#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xchan/corpus.hpp"
#include "xchan/embeddings.hpp"
#include "xchan/gptscore.hpp"
#include "xchan/mi_estimators.hpp"
#include "xchan/silver_labels.hpp"
#include "xchan/synthetic.hpp"
#include "xchan/v_information.hpp"

namespace xchan {

using json = nlohmann::json;

// Exclusive hold on a run directory for the lifetime of the object, via an
// O_EXCL lock file. A second holder gets Error naming the lock file.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

// A run directory and its manifest.json. The manifest holds one entry per
// stage (config, config hash, seeds, summary, outputs) and a digest for
// every output file. It carries no timestamps or absolute paths, so equal
// inputs give an equal manifest.
class RunContext {
 public:
  explicit RunContext(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path path(const std::string& relative) const { return dir_ / relative; }

  const json& manifest() const { return manifest_; }
  // nullptr when the stage has not run.
  const json* stage(const std::string& name) const;

  // Replaces the stage entry, digests `outputs` (paths relative to the run
  // directory) and rewrites manifest.json.
  void record_stage(const std::string& name, const json& config, const json& seeds, const json& summary,
                    const std::vector<std::string>& outputs);

  std::filesystem::path embedding_cache_path() const { return path("cache/embeddings.bin"); }
  std::filesystem::path response_cache_path() const { return path("cache/responses.bin"); }

 private:
  void save() const;

  std::filesystem::path dir_;
  json manifest_;
};

std::string config_hash(const json& config);

// ---- stages -----------------------------------------------------------------

struct SplitOptions {
  std::filesystem::path rationale;  // either may be empty, not both
  std::filesystem::path nle;
  std::uint64_t seed = 0;
  SplitRatios ratios;
};
void run_split(RunContext& ctx, const SplitOptions& opts);

// Splits previously written for `kind`; MissingArtifact if absent.
DatasetSplit load_run_split(const RunContext& ctx, ExplanationKind kind);

struct ProviderOptions {
  std::string provider = "bow-hash";  // bow-hash | hash | remote
  std::string name;                   // embedding name used in file names; defaults to the provider
  std::size_t dim = 64;               // offline providers
  std::uint64_t seed = 0;             // offline providers
  RemoteProviderConfig remote;
};
std::unique_ptr<EmbeddingProvider> make_provider(const ProviderOptions& opts);
std::string embedding_name(const ProviderOptions& opts);

struct EmbedOptions {
  ProviderOptions provider;
};
struct EmbedStats {
  std::size_t texts = 0;
  CacheStats cache;
  std::uint64_t provider_calls = 0;
};
// Embeds the input text and explanan of every split record into the
// embedding cache and registers the embedding under its name.
EmbedStats run_embed(RunContext& ctx, const EmbedOptions& opts);

// Input and explanan vectors for `records` under a registered embedding.
// MissingArtifact names the cache when the embedding or a vector is absent.
PairedData load_embedded(const RunContext& ctx, const std::string& embedding,
                         const std::vector<ExplanationRecord>& records);

struct ValidateOptions {
  Eigen::Index dim = 16;
  std::vector<double> targets{1.0, 2.0};
  int trials = 5;
  std::uint64_t seed = 0;
  MiEstimator estimator = MiEstimator::infonce;
  double lr = 5e-3;
  std::size_t batch_size = 256;
  int epochs = 20;
  std::size_t n_train = 10000;
  SyntheticProtocol protocol;
  double smile_tau = 5.0;
};
ValidationReport run_validate_estimators(RunContext& ctx, const ValidateOptions& opts);

enum class TuneTarget { relevance, informativeness };

struct TuneOptions {
  TuneTarget target = TuneTarget::relevance;
  std::string embedding;
  ExplanationKind kind = ExplanationKind::rationale;
  int budget = 10;
  int max_epochs = 10;
  std::uint64_t seed = 0;
};
void run_tune(RunContext& ctx, const TuneOptions& opts);

struct RelevanceOptions {
  std::string embedding;
  ExplanationKind kind = ExplanationKind::rationale;
  std::uint64_t seed = 0;
  InfoNceConfig config;
  bool from_tuning = false;  // take lr/batch/epochs from the tune stage
};
MiEstimate run_estimate_relevance(RunContext& ctx, const RelevanceOptions& opts);

struct InformativenessOptions {
  std::string embedding;
  ExplanationKind kind = ExplanationKind::rationale;
  std::uint64_t seed = 0;
  PredictorConfig null_config;
  PredictorConfig conditional_config;
  double null_scale = 0.01;
  NullScale null_mode = NullScale::variance;
  bool resample_null = false;  // fresh null draw per instance instead of one fixed vector
  bool from_tuning = false;
};
VInfoEstimate run_estimate_informativeness(RunContext& ctx, const InformativenessOptions& opts);

struct SilverOptions {
  std::string embedding;
  ExplanationKind kind = ExplanationKind::rationale;
  EditUnit edit_unit = EditUnit::token;
};
void run_silver_labels(RunContext& ctx, const SilverOptions& opts);

struct GptScoreOptions {
  ExplanationKind kind = ExplanationKind::rationale;
  std::string backend = "mock";  // mock | remote
  std::uint64_t mock_seed = 0;
  double mock_garbage_rate = 0.0;
  RemoteBackendConfig remote;
};
GptScoreTable run_gptscore(RunContext& ctx, const GptScoreOptions& opts);

// Joins every available per-(embedding, kind) output on the test split
// into score_table.csv; absent scores stay NA.
void run_analyze(RunContext& ctx);

struct ReportOptions {
  std::size_t extremes_k = 3;
  bool welch = false;
};
void run_report(RunContext& ctx, const ReportOptions& opts);

}  // namespace xchan
