#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "test_support.hpp"
#include "xchan/digest.hpp"
#include "xchan/errors.hpp"
#include "xchan/pipeline.hpp"

using namespace xchan;
using xchan::testing::TempDir;

namespace {

const std::filesystem::path fixtures = XCHAN_FIXTURE_DIR;

void split_fixture(RunContext& ctx) {
  run_split(ctx, {fixtures / "fixture_rationale.jsonl", fixtures / "fixture_nle.jsonl", 13, {}});
}

}  // namespace

TEST_CASE("run lock is exclusive") {
  TempDir dir;
  {
    RunLock first(dir.path());
    CHECK_THROWS_AS(RunLock(dir.path()), Error);
  }
  CHECK_NOTHROW(RunLock(dir.path()));
}

TEST_CASE("relevance before embed names the cache") {
  TempDir dir;
  RunContext ctx(dir.path());
  RelevanceOptions r;
  r.embedding = "bow-hash-32";
  CHECK_THROWS_AS(run_estimate_relevance(ctx, r), MissingArtifact);

  split_fixture(ctx);
  try {
    run_estimate_relevance(ctx, r);
    FAIL("expected MissingArtifact");
  } catch (const MissingArtifact& e) {
    CHECK(std::string(e.what()).find("embedding cache") != std::string::npos);
  }
}

TEST_CASE("split stage records its config") {
  TempDir dir;
  RunContext ctx(dir.path());
  split_fixture(ctx);
  const auto train = load_run_split(ctx, ExplanationKind::nle);
  CHECK(train.train.size() + train.validation.size() + train.test.size() == 200);
  CHECK(ctx.stage("split:nle") != nullptr);
  CHECK(ctx.stage("embed:hash-32") == nullptr);
  CHECK_THROWS_AS(run_split(ctx, {fixtures / "absent.jsonl", {}, 1, {}}), MissingArtifact);
}

TEST_CASE("gptscore rerun is served from the cache") {
  TempDir dir;
  RunContext ctx(dir.path());
  split_fixture(ctx);
  GptScoreOptions g;
  g.kind = ExplanationKind::nle;
  g.mock_seed = 2;
  const auto first = run_gptscore(ctx, g);
  CHECK(first.backend_calls > 0);
  const auto again = run_gptscore(ctx, g);
  CHECK(again.backend_calls == 0);
  REQUIRE(again.rows.size() == first.rows.size());
  for (std::size_t r = 0; r < first.rows.size(); ++r) CHECK(again.rows[r].values == first.rows[r].values);
}

TEST_CASE("fixture pipeline manifest is reproducible") {
  TempDir a("xchan-e2e-a");
  TempDir b("xchan-e2e-b");
  const auto first = xchan::testing::run_fixture_pipeline(a.path(), fixtures);
  const auto second = xchan::testing::run_fixture_pipeline(b.path(), fixtures);
  CHECK(first == second);
  CHECK(std::filesystem::exists(a.path() / "report" / "summary.txt"));
  CHECK(std::filesystem::exists(a.path() / "score_table.csv"));

  // Rerunning in place keeps the manifest.
  CHECK(xchan::testing::run_fixture_pipeline(a.path(), fixtures) == first);
}

TEST_CASE("null input can be resampled per instance") {
  TempDir dir;
  RunContext ctx(dir.path());
  split_fixture(ctx);
  EmbedOptions e;
  e.provider.dim = 16;
  run_embed(ctx, e);
  InformativenessOptions i;
  i.embedding = "bow-hash-16";
  i.kind = ExplanationKind::nle;
  i.seed = 4;
  const auto fixed = run_estimate_informativeness(ctx, i);
  i.resample_null = true;
  const auto resampled = run_estimate_informativeness(ctx, i);
  const auto* stage = ctx.stage("estimate-informativeness:bow-hash-16:nle");
  REQUIRE(stage != nullptr);
  CHECK(stage->at("config").at("null_input") == "resampled per instance");
  CHECK(fixed.h_entropy != resampled.h_entropy);
  CHECK(std::isfinite(resampled.v_information));
}
