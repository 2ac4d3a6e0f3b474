#include "xchan/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "xchan/analysis.hpp"
#include "xchan/csv.hpp"
#include "xchan/digest.hpp"
#include "xchan/errors.hpp"
#include "xchan/random.hpp"
#include "xchan/report.hpp"

namespace xchan {

namespace {

constexpr ExplanationKind kKinds[] = {ExplanationKind::rationale, ExplanationKind::nle};

std::string kind_str(ExplanationKind kind) { return std::string(to_string(kind)); }

std::string split_dir(ExplanationKind kind) { return "splits/" + kind_str(kind); }

std::string scoped(const std::string& stem, const std::string& embedding, ExplanationKind kind) {
  return stem + "_" + file_token(embedding) + "_" + kind_str(kind);
}

bool has_split(const RunContext& ctx, ExplanationKind kind) {
  return std::filesystem::exists(ctx.path(split_dir(kind) + "/split_manifest.json"));
}

std::vector<ExplanationKind> available_kinds(const RunContext& ctx) {
  std::vector<ExplanationKind> out;
  for (auto k : kKinds) {
    if (has_split(ctx, k)) out.push_back(k);
  }
  if (out.empty()) throw MissingArtifact("splits/ (run `split` first)");
  return out;
}

std::vector<int> label_indices(const std::vector<ExplanationRecord>& records) {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(static_cast<int>(r.label));
  return out;
}

json predictor_json(const PredictorConfig& c) {
  return {{"lr", c.lr}, {"batch_size", c.batch_size}, {"epochs", c.epochs}};
}

PredictorConfig predictor_from_json(const json& j, int epochs) {
  PredictorConfig c;
  c.lr = j.at("lr").get<double>();
  c.batch_size = static_cast<std::size_t>(j.at("batch_size").get<double>());
  c.epochs = epochs;
  return c;
}

std::string tuning_file(TuneTarget target, const std::string& embedding, ExplanationKind kind) {
  return "tuning/" + scoped(target == TuneTarget::relevance ? "relevance" : "informativeness", embedding, kind) +
         ".json";
}

json read_json(const std::filesystem::path& path, const std::string& display) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact(display);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidInput(display + ": " + e.what());
  }
}

void write_pointwise_csv(const std::filesystem::path& path, std::string_view estimator,
                         const std::vector<PointwiseScore>& scores, std::size_t batch_size, std::uint64_t seed) {
  std::ostringstream out;
  out << "id,estimator,pointwise_nats,batch_size,seed\n";
  for (const auto& s : scores) {
    out << csv_join({s.id, std::string(estimator), format_number(s.nats), std::to_string(batch_size),
                     std::to_string(seed)})
        << '\n';
  }
  write_text_file(path, out.str());
}

// id -> value of `column` from a CSV with an id column; empty if the file
// does not exist.
std::map<std::string, std::optional<double>> read_id_column(const std::filesystem::path& path,
                                                            const std::string& column) {
  std::map<std::string, std::optional<double>> out;
  std::ifstream in(path, std::ios::binary);
  if (!in) return out;
  std::string line;
  if (!std::getline(in, line)) return out;
  const auto header = csv_split(line);
  const auto id_at = std::find(header.begin(), header.end(), "id") - header.begin();
  const auto col_at = std::find(header.begin(), header.end(), column) - header.begin();
  if (id_at == static_cast<long>(header.size()) || col_at == static_cast<long>(header.size())) {
    throw ParseError(1, path.filename().string() + " lacks an id or " + column + " column");
  }
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    const auto cells = csv_split(line);
    if (cells.size() != header.size()) throw ParseError(lineno, path.filename().string() + ": wrong cell count");
    try {
      out[cells[id_at]] = parse_number(cells[col_at]);
    } catch (const InvalidInput& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return out;
}

const json& registered_embedding(const RunContext& ctx, const std::string& embedding) {
  const auto* stage = ctx.stage("embed:" + embedding);
  if (!stage) {
    throw MissingArtifact("embedding cache cache/embeddings.bin has no embedding named '" + embedding +
                          "' (run `embed` first)");
  }
  return stage->at("config");
}

}  // namespace

// ---- run directory ----------------------------------------------------------

RunLock::RunLock(const std::filesystem::path& dir) : path_(dir / ".lock") {
  std::filesystem::create_directories(dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) {
      throw Error("run directory is locked: " + path_.string() +
                  " exists (another xchan process is using it, or remove the stale lock)");
    }
    throw Error("cannot create lock " + path_.string() + ": " + std::strerror(errno));
  }
  const auto pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

std::string config_hash(const json& config) { return sha256_hex(config.dump()); }

RunContext::RunContext(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
  const auto path = dir_ / "manifest.json";
  if (std::filesystem::exists(path)) {
    manifest_ = read_json(path, "manifest.json");
  } else {
    manifest_ = {{"format", "xchan-run-1"},
                 {"config_hash", config_hash(json::object())},
                 {"seeds", json::object()},
                 {"stages", json::object()},
                 {"artifacts", json::object()}};
  }
}

const json* RunContext::stage(const std::string& name) const {
  const auto& stages = manifest_.at("stages");
  const auto it = stages.find(name);
  return it == stages.end() ? nullptr : &*it;
}

void RunContext::record_stage(const std::string& name, const json& config, const json& seeds, const json& summary,
                              const std::vector<std::string>& outputs) {
  json entry;
  entry["config"] = config;
  entry["config_hash"] = config_hash(config);
  entry["seeds"] = seeds;
  entry["summary"] = summary;
  entry["outputs"] = json::object();
  for (const auto& rel : outputs) {
    const auto digest = file_sha256_hex(path(rel));
    entry["outputs"][rel] = digest;
    manifest_["artifacts"][rel] = digest;
  }
  manifest_["stages"][name] = std::move(entry);
  if (!seeds.empty()) manifest_["seeds"][name] = seeds;

  std::string joined;
  for (const auto& [stage_name, stage] : manifest_["stages"].items()) {
    joined += stage_name + "=" + stage.at("config_hash").get<std::string>() + "\n";
  }
  manifest_["config_hash"] = sha256_hex(joined);
  save();
}

void RunContext::save() const { write_text_file(dir_ / "manifest.json", manifest_.dump(2) + "\n"); }

// ---- split ------------------------------------------------------------------

void run_split(RunContext& ctx, const SplitOptions& opts) {
  if (opts.rationale.empty() && opts.nle.empty()) throw InvalidInput("split: give a rationale and/or an NLE corpus");
  for (auto kind : kKinds) {
    const auto& file = kind == ExplanationKind::rationale ? opts.rationale : opts.nle;
    if (file.empty()) continue;
    if (!std::filesystem::exists(file)) throw MissingArtifact("corpus file " + file.string());
    const auto records = load_corpus(file, kind);
    const auto split = split_dataset(records, opts.ratios, opts.seed);
    const auto dir = split_dir(kind);
    write_split(ctx.path(dir), split);
    const json config = {{"corpus_sha256", file_sha256_hex(file)},
                         {"ratios", {opts.ratios.train, opts.ratios.validation, opts.ratios.test}}};
    const json summary = {{"records", records.size()},
                          {"sizes", {split.train.size(), split.validation.size(), split.test.size()}}};
    ctx.record_stage("split:" + kind_str(kind), config, {{"split", opts.seed}}, summary,
                     {dir + "/train.jsonl", dir + "/validation.jsonl", dir + "/test.jsonl",
                      dir + "/split_manifest.json"});
  }
}

DatasetSplit load_run_split(const RunContext& ctx, ExplanationKind kind) {
  if (!has_split(ctx, kind)) throw MissingArtifact(split_dir(kind) + "/split_manifest.json (run `split` first)");
  return read_split(ctx.path(split_dir(kind)), kind);
}

// ---- embed ------------------------------------------------------------------

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderOptions& opts) {
  if (opts.provider == "bow-hash") return std::make_unique<BagOfWordsHashProvider>(opts.dim, opts.seed);
  if (opts.provider == "hash") return std::make_unique<HashEmbeddingProvider>(opts.dim, opts.seed);
  if (opts.provider == "remote") return std::make_unique<RemoteEmbeddingProvider>(opts.remote);
  throw InvalidInput("unknown embedding provider '" + opts.provider + "' (expected bow-hash, hash or remote)");
}

std::string embedding_name(const ProviderOptions& opts) {
  if (!opts.name.empty()) return opts.name;
  if (opts.provider == "remote") return opts.remote.name;
  return opts.provider + "-" + std::to_string(opts.dim);
}

EmbedStats run_embed(RunContext& ctx, const EmbedOptions& opts) {
  const auto name = embedding_name(opts.provider);
  auto provider = make_provider(opts.provider);
  std::vector<std::string> texts;
  for (auto kind : available_kinds(ctx)) {
    const auto split = load_run_split(ctx, kind);
    for (const auto* part : {&split.train, &split.validation, &split.test}) {
      for (const auto& r : *part) {
        texts.push_back(r.input_text());
        texts.push_back(r.explanan);
      }
    }
  }
  EmbeddingCache cache(ctx.embedding_cache_path());
  const auto vectors = cached_embed_all(*provider, texts, cache);

  EmbedStats stats;
  stats.texts = texts.size();
  stats.cache = cache.stats();
  stats.provider_calls = provider->calls();

  const json config = {{"name", name},
                       {"provider", provider->name()},
                       {"model", provider->model()},
                       {"dim", vectors.empty() ? 0 : vectors.front().dim()},
                       {"explanan_text", "verbatim; rationales keep their padding spaces"}};
  const auto rel = "embeddings/" + file_token(name) + ".json";
  write_text_file(ctx.path(rel), config.dump(2) + "\n");
  json seeds = json::object();
  if (opts.provider.provider != "remote") seeds["embedding"] = opts.provider.seed;
  ctx.record_stage("embed:" + name, config, seeds, {{"texts", texts.size()}}, {rel});
  return stats;
}

PairedData load_embedded(const RunContext& ctx, const std::string& embedding,
                         const std::vector<ExplanationRecord>& records) {
  const auto& reg = registered_embedding(ctx, embedding);
  if (!std::filesystem::exists(ctx.embedding_cache_path())) {
    throw MissingArtifact("embedding cache cache/embeddings.bin (run `embed` first)");
  }
  const auto provider = reg.at("provider").get<std::string>();
  const auto model = reg.at("model").get<std::string>();
  EmbeddingCache cache(ctx.embedding_cache_path());

  PairedData data;
  const auto dim = static_cast<Eigen::Index>(reg.at("dim").get<std::size_t>());
  const auto n = static_cast<Eigen::Index>(records.size());
  data.xs.resize(n, dim);
  data.es.resize(n, dim);
  auto fetch = [&](const std::string& text, const std::string& id) {
    auto vec = cache.get(EmbeddingCacheKey::of(provider, model, text));
    if (!vec || static_cast<Eigen::Index>(vec->dim()) != dim) {
      throw MissingArtifact("embedding cache cache/embeddings.bin: no '" + embedding + "' vector for record " + id +
                            " (run `embed` again)");
    }
    return std::move(vec->values);
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    const auto x = fetch(r.input_text(), r.id);
    const auto e = fetch(r.explanan, r.id);
    for (Eigen::Index j = 0; j < dim; ++j) {
      data.xs(i, j) = x[static_cast<std::size_t>(j)];
      data.es(i, j) = e[static_cast<std::size_t>(j)];
    }
    data.ids.push_back(r.id);
  }
  return data;
}

// ---- synthetic validation ---------------------------------------------------

ValidationReport run_validate_estimators(RunContext& ctx, const ValidateOptions& opts) {
  if (opts.targets.empty()) throw InvalidInput("validate-estimators: no targets");
  std::vector<GaussianScenario> scenarios;
  for (double t : opts.targets) scenarios.push_back({opts.dim, t, opts.n_train, 0});

  ScenarioEstimator estimator;
  json config = {{"estimator", to_string(opts.estimator)},
                 {"dim", opts.dim},
                 {"targets", opts.targets},
                 {"trials", opts.trials},
                 {"lr", opts.lr},
                 {"batch_size", opts.batch_size},
                 {"epochs", opts.epochs},
                 {"n_train", opts.n_train},
                 {"n_validation", opts.protocol.n_validation},
                 {"n_eval", opts.protocol.n_eval}};
  if (opts.estimator == MiEstimator::infonce) {
    estimator = infonce_scenario_estimator({opts.lr, opts.batch_size, opts.epochs, 0}, opts.protocol);
  } else {
    AltTrainConfig alt;
    alt.bound.kind = opts.estimator;
    if (opts.estimator == MiEstimator::smile) {
      alt.bound.tau = opts.smile_tau;
      config["smile_tau"] = opts.smile_tau;
    }
    alt.lr = opts.lr;
    alt.batch_size = opts.batch_size;
    alt.epochs = opts.epochs;
    estimator = alt_bound_scenario_estimator(alt, opts.protocol);
  }
  const auto threads = std::max(1u, std::thread::hardware_concurrency());
  const auto report = validate_estimator(estimator, scenarios, opts.trials, opts.seed, threads);

  const auto est = std::string(to_string(opts.estimator));
  std::ostringstream csv;
  csv << "estimator,target_mi,analytic_mi,trial,seed,estimate,squared_error,failed,error\n";
  for (const auto& t : report.trials) {
    const auto analytic = gaussian_mi(rho_for_mi(t.target_mi, opts.dim), opts.dim);
    csv << csv_join({est, format_number(t.target_mi), format_number(analytic), std::to_string(t.trial),
                     std::to_string(t.seed), t.failed ? "NA" : format_number(t.estimate),
                     t.failed ? "NA" : format_number(t.squared_error), t.failed ? "true" : "false", t.error})
        << '\n';
  }
  std::ostringstream txt;
  txt << "Estimator validation on correlated Gaussians (d = " << opts.dim << ", " << opts.trials << " trials)\n\n";
  txt << "estimator  MSE        failed\n";
  txt << est << std::string(est.size() < 11 ? 11 - est.size() : 1, ' ') << format_number(report.mse) << "  "
      << report.failed << "\n\n";
  txt << "target  mean_estimate  variance  mse\n";
  json scenarios_json = json::array();
  for (const auto& s : report.scenarios) {
    txt << format_number(s.target_mi) << "  " << format_number(s.mean_estimate) << "  " << format_number(s.variance)
        << "  " << format_number(s.mse) << '\n';
    scenarios_json.push_back({{"target_mi", s.target_mi},
                              {"succeeded", s.succeeded},
                              {"mean_estimate", format_number(s.mean_estimate)},
                              {"variance", format_number(s.variance)},
                              {"mse", format_number(s.mse)}});
  }
  const auto csv_rel = "validation/" + est + ".csv";
  const auto txt_rel = "validation/" + est + "_summary.txt";
  write_text_file(ctx.path(csv_rel), csv.str());
  write_text_file(ctx.path(txt_rel), txt.str());
  ctx.record_stage("validate-estimators:" + est, config, {{"master", opts.seed}},
                   {{"mse", format_number(report.mse)}, {"failed", report.failed}, {"scenarios", scenarios_json}},
                   {csv_rel, txt_rel});
  return report;
}

// ---- tuning -----------------------------------------------------------------

void run_tune(RunContext& ctx, const TuneOptions& opts) {
  const auto split = load_run_split(ctx, opts.kind);
  const auto train = load_embedded(ctx, opts.embedding, split.train);
  const auto val = load_embedded(ctx, opts.embedding, split.validation);

  auto trace_json = [](const SearchResult& r) {
    json trace = json::array();
    for (const auto& t : r.trace) {
      trace.push_back({{"config", t.config},
                       {"objective", t.failed ? json(nullptr) : json(t.objective)},
                       {"error", t.error}});
    }
    return json{{"best", r.best}, {"best_objective", r.best_objective}, {"trace", trace}};
  };

  json result;
  json seeds = {{"search", opts.seed}};
  if (opts.target == TuneTarget::relevance) {
    const std::vector<SearchDimension> space = {
        SearchDimension::choice("lr", {1e-3, 3e-4, 1e-4, 3e-5, 1e-5}),
        SearchDimension::choice("batch_size", {8, 16, 32, 64}),
    };
    // Validation InfoNCE estimate ln N - L_N, negated: losses at different
    // batch sizes are not comparable, estimates are.
    const auto objective = [&](const SearchConfig& cfg) {
      InfoNceConfig c;
      c.lr = cfg.at("lr");
      c.batch_size = static_cast<std::size_t>(cfg.at("batch_size"));
      c.epochs = opts.max_epochs;
      const auto trained = train_infonce(train, val, c, derive_seed(opts.seed, 2));
      return trained.best_validation_loss - std::log(static_cast<double>(c.batch_size));
    };
    const auto found = random_search(space, opts.budget, objective, derive_seed(opts.seed, 1));
    result = trace_json(found);
    result["epochs"] = opts.max_epochs;
  } else {
    const std::vector<SearchDimension> space = {
        SearchDimension::log_uniform("lr", 1e-6, 1e-2),
        SearchDimension::choice("batch_size", {4, 8, 16}),
    };
    const auto y_train = label_indices(split.train);
    const auto y_val = label_indices(split.validation);
    const auto null = make_null_input(derive_seed(opts.seed, 3), train.es.cols());
    const auto null_train = null_design(null, train.es.rows());
    const auto null_val = null_design(null, val.es.rows());
    auto objective_on = [&](const Matrix& xt, const Matrix& xv) {
      return [&, xt_ptr = &xt, xv_ptr = &xv](const SearchConfig& cfg) {
        PredictorConfig c;
        c.lr = cfg.at("lr");
        c.batch_size = static_cast<std::size_t>(cfg.at("batch_size"));
        c.epochs = opts.max_epochs;
        return fit_predictor(*xt_ptr, y_train, *xv_ptr, y_val, c, derive_seed(opts.seed, 4)).best_validation_nll;
      };
    };
    const auto null_found = random_search(space, opts.budget, objective_on(null_train, null_val),
                                          derive_seed(opts.seed, 1));
    const auto cond_found = random_search(space, opts.budget, objective_on(train.es, val.es),
                                          derive_seed(opts.seed, 2));
    result = {{"null", trace_json(null_found)}, {"conditional", trace_json(cond_found)}, {"epochs", opts.max_epochs}};
    seeds["null_input"] = null.seed;
  }
  const auto rel = tuning_file(opts.target, opts.embedding, opts.kind);
  write_text_file(ctx.path(rel), result.dump(2) + "\n");
  const auto target = opts.target == TuneTarget::relevance ? "relevance" : "informativeness";
  const json config = {{"target", target},
                       {"embedding", opts.embedding},
                       {"kind", kind_str(opts.kind)},
                       {"budget", opts.budget},
                       {"max_epochs", opts.max_epochs}};
  json summary = opts.target == TuneTarget::relevance
                     ? json{{"best", result["best"]}}
                     : json{{"null", result["null"]["best"]}, {"conditional", result["conditional"]["best"]}};
  ctx.record_stage(std::string("tune:") + target + ":" + opts.embedding + ":" + kind_str(opts.kind), config, seeds,
                   summary, {rel});
}

// ---- estimators -------------------------------------------------------------

MiEstimate run_estimate_relevance(RunContext& ctx, const RelevanceOptions& opts) {
  InfoNceConfig cfg = opts.config;
  if (opts.from_tuning) {
    const auto rel = tuning_file(TuneTarget::relevance, opts.embedding, opts.kind);
    const auto tuned = read_json(ctx.path(rel), rel + " (run `tune --target relevance` first)");
    cfg.lr = tuned.at("best").at("lr").get<double>();
    cfg.batch_size = static_cast<std::size_t>(tuned.at("best").at("batch_size").get<double>());
    cfg.epochs = tuned.at("epochs").get<int>();
  }
  const auto split = load_run_split(ctx, opts.kind);
  const auto train = load_embedded(ctx, opts.embedding, split.train);
  const auto val = load_embedded(ctx, opts.embedding, split.validation);
  const auto test = load_embedded(ctx, opts.embedding, split.test);

  const auto trained = train_infonce(train, val, cfg, derive_seed(opts.seed, 1));
  const auto batches = make_batches(test, cfg.batch_size, derive_seed(opts.seed, 2));
  if (batches.empty()) {
    throw InvalidInput("estimate-relevance: test split has " + std::to_string(test.size()) +
                       " rows, fewer than one batch of " + std::to_string(cfg.batch_size));
  }
  auto est = infonce_estimate(batches, trained.critic);
  est.training_history = trained.train_history;

  const auto rel = scoped("relevance", opts.embedding, opts.kind) + ".csv";
  write_pointwise_csv(ctx.path(rel), "infonce", est.pointwise, cfg.batch_size, opts.seed);
  const json config = {{"embedding", opts.embedding},
                       {"kind", kind_str(opts.kind)},
                       {"lr", cfg.lr},
                       {"batch_size", cfg.batch_size},
                       {"epochs", cfg.epochs},
                       {"from_tuning", opts.from_tuning}};
  const json summary = {{"dataset_nats", est.dataset_nats},
                        {"ceiling_nats", std::log(static_cast<double>(cfg.batch_size))},
                        {"batches", est.batch_estimates.size()},
                        {"scored", est.pointwise.size()},
                        {"test_rows", test.size()},
                        {"best_validation_loss", trained.best_validation_loss},
                        {"best_step", trained.best_step}};
  ctx.record_stage("estimate-relevance:" + opts.embedding + ":" + kind_str(opts.kind), config,
                   {{"estimator", opts.seed}}, summary, {rel});
  return est;
}

VInfoEstimate run_estimate_informativeness(RunContext& ctx, const InformativenessOptions& opts) {
  PredictorConfig null_cfg = opts.null_config, cond_cfg = opts.conditional_config;
  if (opts.from_tuning) {
    const auto rel = tuning_file(TuneTarget::informativeness, opts.embedding, opts.kind);
    const auto tuned = read_json(ctx.path(rel), rel + " (run `tune --target informativeness` first)");
    const int epochs = tuned.at("epochs").get<int>();
    null_cfg = predictor_from_json(tuned.at("null").at("best"), epochs);
    cond_cfg = predictor_from_json(tuned.at("conditional").at("best"), epochs);
  }
  const auto split = load_run_split(ctx, opts.kind);
  const auto train = load_embedded(ctx, opts.embedding, split.train);
  const auto val = load_embedded(ctx, opts.embedding, split.validation);
  const auto test = load_embedded(ctx, opts.embedding, split.test);
  const auto y_train = label_indices(split.train);
  const auto y_val = label_indices(split.validation);
  const auto y_test = label_indices(split.test);

  const auto null = make_null_input(derive_seed(opts.seed, 1), train.es.cols(), opts.null_scale, opts.null_mode);
  auto design = [&](Eigen::Index rows, std::uint64_t stream) {
    if (!opts.resample_null) return null_design(null, rows);
    return resampled_null_design(derive_seed(null.seed, stream), rows, train.es.cols(), null.stddev);
  };
  const auto null_fit = fit_predictor(design(train.es.rows(), 1), y_train, design(val.es.rows(), 2), y_val, null_cfg,
                                      derive_seed(opts.seed, 2));
  const auto cond_fit = fit_predictor(train.es, y_train, val.es, y_val, cond_cfg, derive_seed(opts.seed, 3));
  const auto est =
      v_information(null_fit.model, cond_fit.model, y_test, design(test.es.rows(), 3), test.es, test.ids);

  const auto rel = scoped("informativeness", opts.embedding, opts.kind) + ".csv";
  write_pointwise_csv(ctx.path(rel), "v_info", est.pointwise, cond_cfg.batch_size, opts.seed);
  const json config = {{"embedding", opts.embedding},
                       {"kind", kind_str(opts.kind)},
                       {"null", predictor_json(null_cfg)},
                       {"conditional", predictor_json(cond_cfg)},
                       {"null_scale", opts.null_scale},
                       {"null_scale_is", opts.null_mode == NullScale::variance ? "variance" : "stddev"},
                       {"null_input", opts.resample_null ? "resampled per instance" : "fixed"},
                       {"from_tuning", opts.from_tuning}};
  const json summary = {{"h_entropy", est.h_entropy},
                        {"h_conditional", est.h_conditional},
                        {"v_information", est.v_information},
                        {"test_rows", test.size()},
                        {"null_single_class", null_fit.single_class}};
  ctx.record_stage("estimate-informativeness:" + opts.embedding + ":" + kind_str(opts.kind), config,
                   {{"estimator", opts.seed}, {"null_input", null.seed}}, summary, {rel});
  return est;
}

// ---- silver labels ----------------------------------------------------------

void run_silver_labels(RunContext& ctx, const SilverOptions& opts) {
  const auto split = load_run_split(ctx, opts.kind);
  const auto test = load_embedded(ctx, opts.embedding, split.test);
  std::ostringstream out;
  out << "id,type_overlap_ratio,edit_distance_ratio,cosine_similarity\n";
  std::size_t undefined = 0;
  for (std::size_t i = 0; i < split.test.size(); ++i) {
    const auto& r = split.test[i];
    const auto input = r.input_text();
    auto guarded = [&](auto fn) -> std::optional<double> {
      try {
        return fn();
      } catch (const InvalidInput&) {
        ++undefined;
        return std::nullopt;
      }
    };
    const auto overlap = guarded([&] { return type_overlap_ratio(input, r.explanan); });
    const auto edit = guarded([&] { return edit_distance_ratio(input, r.explanan, opts.edit_unit); });
    const auto cosine = guarded([&] {
      const Vector x = test.xs.row(static_cast<Eigen::Index>(i)).transpose();
      const Vector e = test.es.row(static_cast<Eigen::Index>(i)).transpose();
      return cosine_similarity(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                               std::span<const double>(e.data(), static_cast<std::size_t>(e.size())));
    });
    out << csv_join({r.id, format_number(overlap), format_number(edit), format_number(cosine)}) << '\n';
  }
  const auto rel = scoped("silver", opts.embedding, opts.kind) + ".csv";
  write_text_file(ctx.path(rel), out.str());
  const json config = {{"embedding", opts.embedding},
                       {"kind", kind_str(opts.kind)},
                       {"edit_unit", opts.edit_unit == EditUnit::token ? "token" : "character"}};
  ctx.record_stage("silver-labels:" + opts.embedding + ":" + kind_str(opts.kind), config, json::object(),
                   {{"rows", split.test.size()}, {"undefined_values", undefined}}, {rel});
}

// ---- GPTScore ---------------------------------------------------------------

GptScoreTable run_gptscore(RunContext& ctx, const GptScoreOptions& opts) {
  const auto split = load_run_split(ctx, opts.kind);
  std::unique_ptr<CompletionBackend> backend;
  json seeds = json::object();
  if (opts.backend == "mock") {
    backend = std::make_unique<MockBackend>(opts.mock_seed, opts.mock_garbage_rate);
    seeds["mock_backend"] = opts.mock_seed;
  } else if (opts.backend == "remote") {
    backend = std::make_unique<RemoteBackend>(opts.remote);
  } else {
    throw InvalidInput("unknown completion backend '" + opts.backend + "' (expected mock or remote)");
  }
  ResponseCache cache(ctx.response_cache_path());
  const auto table = score_records(split.test, evaluation_items(), *backend, cache);

  std::ostringstream out;
  std::vector<std::string> header = {"id"};
  for (const auto& item : table.items) header.push_back(item);
  out << csv_join(header) << '\n';
  for (const auto& row : table.rows) {
    std::vector<std::string> cells = {row.id};
    for (const auto& v : row.values) cells.push_back(v ? std::to_string(*v) : "NA");
    out << csv_join(cells) << '\n';
  }
  const auto rel = "gptscore_" + kind_str(opts.kind) + ".csv";
  write_text_file(ctx.path(rel), out.str());
  json config = {{"kind", kind_str(opts.kind)}, {"backend", backend->id()}};
  if (opts.backend == "mock") config["garbage_rate"] = opts.mock_garbage_rate;
  ctx.record_stage("gptscore:" + kind_str(opts.kind), config, seeds,
                   {{"rows", table.rows.size()},
                    {"parse_failures", table.parse_failures},
                    {"transport_failures", table.transport_failures}},
                   {rel});
  if (table.transport_failures > 0) {
    throw TransportError(std::to_string(table.transport_failures) +
                         " completion requests failed; rerun to retry them (answers so far are cached)");
  }
  return table;
}

// ---- analyze / report -------------------------------------------------------

void run_analyze(RunContext& ctx) {
  std::vector<std::string> embeddings;
  for (const auto& [name, _] : ctx.manifest().at("stages").items()) {
    if (name.rfind("embed:", 0) == 0) embeddings.push_back(name.substr(6));
  }
  if (embeddings.empty()) throw MissingArtifact("embeddings/ (run `embed` first)");

  const auto items = evaluation_items();
  ScoreTable table;
  json inputs = json::object();
  auto note_input = [&](const std::string& rel) {
    if (std::filesystem::exists(ctx.path(rel))) inputs[rel] = file_sha256_hex(ctx.path(rel));
  };
  for (auto kind : available_kinds(ctx)) {
    const auto split = load_run_split(ctx, kind);
    const auto gpt_rel = "gptscore_" + kind_str(kind) + ".csv";
    note_input(gpt_rel);
    std::vector<std::map<std::string, std::optional<double>>> gpt;
    for (const auto& item : items) gpt.push_back(read_id_column(ctx.path(gpt_rel), std::string(item.name)));

    for (const auto& emb : embeddings) {
      const auto rel_rel = scoped("relevance", emb, kind) + ".csv";
      const auto inf_rel = scoped("informativeness", emb, kind) + ".csv";
      const auto sil_rel = scoped("silver", emb, kind) + ".csv";
      for (const auto& r : {rel_rel, inf_rel, sil_rel}) note_input(r);
      const auto relevance = read_id_column(ctx.path(rel_rel), "pointwise_nats");
      const auto informativeness = read_id_column(ctx.path(inf_rel), "pointwise_nats");
      const auto overlap = read_id_column(ctx.path(sil_rel), "type_overlap_ratio");
      const auto edit = read_id_column(ctx.path(sil_rel), "edit_distance_ratio");
      const auto cosine = read_id_column(ctx.path(sil_rel), "cosine_similarity");
      auto lookup = [](const auto& m, const std::string& id) -> std::optional<double> {
        const auto it = m.find(id);
        return it == m.end() ? std::nullopt : it->second;
      };
      for (const auto& rec : split.test) {
        ScoreRow row;
        row.id = rec.id;
        row.embedding = emb;
        row.kind = kind;
        row.label = rec.label;
        row.relevance_nats = lookup(relevance, rec.id);
        row.informativeness_nats = lookup(informativeness, rec.id);
        row.type_overlap_ratio = lookup(overlap, rec.id);
        row.edit_distance_ratio = lookup(edit, rec.id);
        row.cosine_similarity = lookup(cosine, rec.id);
        for (std::size_t i = 0; i < items.size(); ++i) row.gptscore[i] = lookup(gpt[i], rec.id);
        table.rows.push_back(std::move(row));
      }
    }
  }
  table.validate();
  write_score_table(ctx.path("score_table.csv"), table);

  json missing = json::object();
  for (const auto& col : numeric_score_columns()) {
    std::size_t n = 0;
    for (const auto& row : table.rows) n += score_column(row, col) ? 0 : 1;
    missing[col] = n;
  }
  ctx.record_stage("analyze", {{"embeddings", embeddings}, {"inputs", inputs}}, json::object(),
                   {{"rows", table.rows.size()}, {"missing", missing}}, {"score_table.csv"});
}

void run_report(RunContext& ctx, const ReportOptions& opts) {
  if (!std::filesystem::exists(ctx.path("score_table.csv"))) {
    throw MissingArtifact("score_table.csv (run `analyze` first)");
  }
  const auto table = read_score_table(ctx.path("score_table.csv"));

  // Report provenance: every other stage's config hash and seeds.
  json hashes = json::object();
  for (const auto& [name, stage] : ctx.manifest().at("stages").items()) {
    if (name != "report") hashes[name] = stage.at("config_hash");
  }
  ReportConfig rc;
  rc.dir = ctx.path("report");
  rc.extremes_k = opts.extremes_k;
  rc.ttest = opts.welch ? TTestKind::welch : TTestKind::paired;
  rc.run = {{"config_hashes", hashes}, {"seeds", ctx.manifest().at("seeds")},
            {"score_table_sha256", file_sha256_hex(ctx.path("score_table.csv"))}};
  const auto files = emit_report(table, rc);

  std::vector<std::string> outputs;
  for (const auto& f : files) outputs.push_back("report/" + f.path.generic_string());
  ctx.record_stage("report", {{"extremes_k", opts.extremes_k}, {"ttest", opts.welch ? "welch" : "paired"}},
                   json::object(), {{"files", files.size()}}, outputs);
}

}  // namespace xchan
