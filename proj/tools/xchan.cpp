// xchan: relevance / informativeness pipeline over a run directory.

#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "xchan/errors.hpp"
#include "xchan/pipeline.hpp"

namespace {

using namespace xchan;

enum Exit { kOk = 0, kFailure = 1, kUsage = 2, kMissing = 3, kNumeric = 4, kTransport = 5 };

struct KindOption {
  std::string value = "rationale";
  ExplanationKind get() const {
    const auto k = parse_kind(value);
    if (!k) throw InvalidInput("unknown kind '" + value + "'");
    return *k;
  }
};

void add_kind(CLI::App* cmd, KindOption& kind) {
  cmd->add_option("--kind", kind.value, "rationale or nle")
      ->check(CLI::IsMember({"rationale", "nle"}))
      ->capture_default_str();
}

struct RemoteOptions {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key_env = "OPENAI_API_KEY";
  int timeout_s = 60;
  int attempts = 4;

  Endpoint endpoint() const {
    Endpoint e;
    e.base_url = base_url;
    if (const char* key = std::getenv(api_key_env.c_str())) e.api_key = key;
    e.timeout = std::chrono::seconds(timeout_s);
    return e;
  }
};

void add_remote(CLI::App* cmd, RemoteOptions& r) {
  cmd->add_option("--base-url", r.base_url, "API base URL")->capture_default_str();
  cmd->add_option("--api-key-env", r.api_key_env, "environment variable holding the API key")->capture_default_str();
  cmd->add_option("--timeout", r.timeout_s, "request timeout, seconds")->capture_default_str();
  cmd->add_option("--attempts", r.attempts, "attempts per request, including the first")->capture_default_str();
}

void print(const std::string& line) { std::cout << line << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Estimate relevance I(X;E) and informativeness I(Y;E) of text explanations"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML-style config file; command-line flags override it");
  std::string run_dir = "run";
  app.add_option("--run-dir", run_dir, "run directory holding artifacts and manifest.json")->capture_default_str();

  // split
  SplitOptions split;
  auto* split_cmd = app.add_subcommand("split", "split corpora into train/validation/test");
  split_cmd->add_option("--rationale", split.rationale, "rationale corpus (JSON Lines)");
  split_cmd->add_option("--nle", split.nle, "NLE corpus (JSON Lines)");
  split_cmd->add_option("--seed", split.seed, "shuffle seed")->required();
  split_cmd->add_option("--validation-ratio", split.ratios.validation)->capture_default_str();
  split_cmd->add_option("--test-ratio", split.ratios.test)->capture_default_str();

  // embed
  EmbedOptions embed;
  RemoteOptions embed_remote;
  auto* embed_cmd = app.add_subcommand("embed", "embed inputs and explanans into the cache");
  embed_cmd->add_option("--provider", embed.provider.provider, "bow-hash, hash or remote")
      ->check(CLI::IsMember({"bow-hash", "hash", "remote"}))
      ->capture_default_str();
  embed_cmd->add_option("--name", embed.provider.name, "embedding name (default derives from the provider)");
  embed_cmd->add_option("--dim", embed.provider.dim, "offline provider dimension")->capture_default_str();
  embed_cmd->add_option("--embed-seed", embed.provider.seed, "offline provider seed")->capture_default_str();
  embed_cmd->add_option("--model", embed.provider.remote.model, "remote model")->capture_default_str();
  embed_cmd->add_option("--batch-size", embed.provider.remote.batch_size, "texts per remote request")
      ->capture_default_str();
  embed_cmd->add_option("--max-parallel", embed.provider.remote.max_parallel)->capture_default_str();
  add_remote(embed_cmd, embed_remote);

  // validate-estimators
  ValidateOptions validate;
  std::string validate_estimator = "infonce";
  auto* validate_cmd = app.add_subcommand("validate-estimators", "MI estimators on correlated Gaussians");
  validate_cmd->add_option("--dim", validate.dim)->capture_default_str();
  validate_cmd->add_option("--targets", validate.targets, "true MI values, nats")->delimiter(',');
  validate_cmd->add_option("--trials", validate.trials)->capture_default_str();
  validate_cmd->add_option("--seed", validate.seed)->required();
  validate_cmd->add_option("--estimator", validate_estimator)
      ->check(CLI::IsMember({"infonce", "mine", "nwj", "smile"}))
      ->capture_default_str();
  validate_cmd->add_option("--lr", validate.lr)->capture_default_str();
  validate_cmd->add_option("--batch-size", validate.batch_size)->capture_default_str();
  validate_cmd->add_option("--epochs", validate.epochs)->capture_default_str();
  validate_cmd->add_option("--n-train", validate.n_train)->capture_default_str();
  validate_cmd->add_option("--n-validation", validate.protocol.n_validation)->capture_default_str();
  validate_cmd->add_option("--n-eval", validate.protocol.n_eval)->capture_default_str();
  validate_cmd->add_option("--smile-tau", validate.smile_tau)->capture_default_str();

  // tune
  TuneOptions tune;
  KindOption tune_kind;
  std::string tune_target = "relevance";
  auto* tune_cmd = app.add_subcommand("tune", "seeded random search over estimator hyperparameters");
  tune_cmd->add_option("--target", tune_target)
      ->check(CLI::IsMember({"relevance", "informativeness"}))
      ->capture_default_str();
  tune_cmd->add_option("--embedding", tune.embedding)->required();
  add_kind(tune_cmd, tune_kind);
  tune_cmd->add_option("--budget", tune.budget, "configurations to try")->capture_default_str();
  tune_cmd->add_option("--max-epochs", tune.max_epochs)->capture_default_str();
  tune_cmd->add_option("--seed", tune.seed)->required();

  // estimate-relevance
  RelevanceOptions relevance;
  KindOption relevance_kind;
  auto* relevance_cmd = app.add_subcommand("estimate-relevance", "pointwise InfoNCE estimate of I(X;E)");
  relevance_cmd->add_option("--embedding", relevance.embedding)->required();
  add_kind(relevance_cmd, relevance_kind);
  relevance_cmd->add_option("--seed", relevance.seed)->required();
  relevance_cmd->add_option("--lr", relevance.config.lr)->capture_default_str();
  relevance_cmd->add_option("--batch-size", relevance.config.batch_size)->capture_default_str();
  relevance_cmd->add_option("--epochs", relevance.config.epochs)->capture_default_str();
  relevance_cmd->add_flag("--from-tuning", relevance.from_tuning, "use the configuration picked by `tune`");

  // estimate-informativeness
  InformativenessOptions informativeness;
  KindOption informativeness_kind;
  bool null_stddev = false;
  auto* inf_cmd = app.add_subcommand("estimate-informativeness", "pointwise V-information estimate of I(Y;E)");
  inf_cmd->add_option("--embedding", informativeness.embedding)->required();
  add_kind(inf_cmd, informativeness_kind);
  inf_cmd->add_option("--seed", informativeness.seed)->required();
  inf_cmd->add_option("--lr", informativeness.conditional_config.lr)->capture_default_str();
  inf_cmd->add_option("--batch-size", informativeness.conditional_config.batch_size)->capture_default_str();
  inf_cmd->add_option("--epochs", informativeness.conditional_config.epochs)->capture_default_str();
  inf_cmd->add_option("--null-lr", informativeness.null_config.lr)->capture_default_str();
  inf_cmd->add_option("--null-batch-size", informativeness.null_config.batch_size)->capture_default_str();
  inf_cmd->add_option("--null-epochs", informativeness.null_config.epochs)->capture_default_str();
  inf_cmd->add_option("--null-scale", informativeness.null_scale, "null-input noise scale")->capture_default_str();
  inf_cmd->add_flag("--null-scale-is-stddev", null_stddev, "read --null-scale as a standard deviation");
  inf_cmd->add_flag("--resample-null", informativeness.resample_null, "draw a fresh null input per instance");
  inf_cmd->add_flag("--from-tuning", informativeness.from_tuning, "use the configurations picked by `tune`");

  // silver-labels
  SilverOptions silver;
  KindOption silver_kind;
  bool char_edit = false;
  auto* silver_cmd = app.add_subcommand("silver-labels", "lexical-semantic reference scores");
  silver_cmd->add_option("--embedding", silver.embedding)->required();
  add_kind(silver_cmd, silver_kind);
  silver_cmd->add_flag("--character-edit", char_edit, "edit distance over characters instead of tokens");

  // gptscore
  GptScoreOptions gpt;
  KindOption gpt_kind;
  RemoteOptions gpt_remote;
  auto* gpt_cmd = app.add_subcommand("gptscore", "Likert judgments of the nine evaluation items");
  add_kind(gpt_cmd, gpt_kind);
  gpt_cmd->add_option("--backend", gpt.backend, "mock or remote")
      ->check(CLI::IsMember({"mock", "remote"}))
      ->capture_default_str();
  gpt_cmd->add_option("--mock-seed", gpt.mock_seed)->capture_default_str();
  gpt_cmd->add_option("--mock-garbage-rate", gpt.mock_garbage_rate)->capture_default_str();
  gpt_cmd->add_option("--model", gpt.remote.model)->capture_default_str();
  gpt_cmd->add_flag("--chat", gpt.remote.chat, "use the chat completions endpoint");
  gpt_cmd->add_option("--max-parallel", gpt.remote.max_parallel)->capture_default_str();
  add_remote(gpt_cmd, gpt_remote);

  auto* analyze_cmd = app.add_subcommand("analyze", "join all scores into score_table.csv");

  ReportOptions report;
  auto* report_cmd = app.add_subcommand("report", "summary tables, correlations, tests and plots");
  report_cmd->add_option("--extremes-k", report.extremes_k)->capture_default_str();
  report_cmd->add_flag("--welch", report.welch, "unpaired Welch tests instead of paired ones");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    RunLock lock(run_dir);
    RunContext ctx(run_dir);

    if (split_cmd->parsed()) {
      split.ratios.train = 1.0 - split.ratios.validation - split.ratios.test;
      run_split(ctx, split);
      print("split written under " + (ctx.dir() / "splits").string());
    } else if (embed_cmd->parsed()) {
      embed.provider.remote.endpoint = embed_remote.endpoint();
      embed.provider.remote.retry.max_attempts = embed_remote.attempts;
      if (embed.provider.provider == "remote" && !embed.provider.name.empty()) {
        embed.provider.remote.name = embed.provider.name;
      }
      const auto stats = run_embed(ctx, embed);
      print("embedded " + std::to_string(stats.texts) + " texts as '" + embedding_name(embed.provider) +
            "': cache hits " + std::to_string(stats.cache.hits) + ", misses " + std::to_string(stats.cache.misses) +
            ", provider calls " + std::to_string(stats.provider_calls));
    } else if (validate_cmd->parsed()) {
      validate.estimator = *parse_estimator(validate_estimator);
      const auto r = run_validate_estimators(ctx, validate);
      for (const auto& s : r.scenarios) {
        print("target " + std::to_string(s.target_mi) + ": mean " + std::to_string(s.mean_estimate) + ", variance " +
              std::to_string(s.variance) + ", mse " + std::to_string(s.mse));
      }
      print("mse " + std::to_string(r.mse) + ", failed trials " + std::to_string(r.failed));
    } else if (tune_cmd->parsed()) {
      tune.kind = tune_kind.get();
      tune.target = tune_target == "relevance" ? TuneTarget::relevance : TuneTarget::informativeness;
      run_tune(ctx, tune);
      print("tuning written under " + (ctx.dir() / "tuning").string());
    } else if (relevance_cmd->parsed()) {
      relevance.kind = relevance_kind.get();
      const auto est = run_estimate_relevance(ctx, relevance);
      print("relevance " + std::to_string(est.dataset_nats) + " nats over " +
            std::to_string(est.batch_estimates.size()) + " batches");
    } else if (inf_cmd->parsed()) {
      informativeness.kind = informativeness_kind.get();
      informativeness.null_mode = null_stddev ? NullScale::stddev : NullScale::variance;
      const auto est = run_estimate_informativeness(ctx, informativeness);
      print("informativeness " + std::to_string(est.v_information) + " nats");
    } else if (silver_cmd->parsed()) {
      silver.kind = silver_kind.get();
      silver.edit_unit = char_edit ? EditUnit::character : EditUnit::token;
      run_silver_labels(ctx, silver);
      print("silver labels written");
    } else if (gpt_cmd->parsed()) {
      gpt.kind = gpt_kind.get();
      gpt.remote.endpoint = gpt_remote.endpoint();
      gpt.remote.retry.max_attempts = gpt_remote.attempts;
      const auto table = run_gptscore(ctx, gpt);
      print("gptscore: " + std::to_string(table.rows.size()) + " records, backend calls " +
            std::to_string(table.backend_calls) + ", parse failures " + std::to_string(table.parse_failures));
    } else if (analyze_cmd->parsed()) {
      run_analyze(ctx);
      print("score table written to " + (ctx.dir() / "score_table.csv").string());
    } else if (report_cmd->parsed()) {
      run_report(ctx, report);
      print("report written under " + (ctx.dir() / "report").string());
    }
    return kOk;
  } catch (const MissingArtifact& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kMissing;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    if (!e.history().empty()) {
      const auto& h = e.history();
      const std::size_t from = h.size() > 10 ? h.size() - 10 : 0;
      std::cerr << "loss history (" << h.size() << " steps, last " << h.size() - from << "):";
      for (std::size_t i = from; i < h.size(); ++i) std::cerr << ' ' << h[i];
      std::cerr << '\n';
    }
    return kNumeric;
  } catch (const TransportError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kTransport;
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
