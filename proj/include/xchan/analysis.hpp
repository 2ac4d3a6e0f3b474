#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xchan/corpus.hpp"

namespace xchan {

// ---- distributions ----------------------------------------------------------

// Regularized incomplete beta I_x(a, b), continued fraction (modified Lentz).
double incomplete_beta(double a, double b, double x);

// Student t with `dof` degrees of freedom (need not be an integer).
double student_t_cdf(double t, double dof);
double student_t_two_sided_p(double t, double dof);

// Upper tail of F(df1, df2).
double f_distribution_sf(double f, double df1, double df2);

// ---- correlation ------------------------------------------------------------

// 1-based ranks, ties share the average of the positions they span.
std::vector<double> average_ranks(std::span<const double> values);

struct SpearmanResult {
  double rho = 0.0;
  double p = 1.0;
  std::size_t n = 0;
  bool defined = true;  // false when either side is constant; rho and p are NaN
};

// Pearson correlation of average ranks; p from t = rho sqrt((n-2)/(1-rho^2))
// on n - 2 dof, two-sided.
SpearmanResult spearman(std::span<const double> xs, std::span<const double> ys);

// ---- explained variance -----------------------------------------------------

struct TermSS {
  std::string name;
  double sum_sq = 0.0;  // type-2: residual SS without the term minus full residual SS
  double f = 0.0;       // NaN when the model is saturated
  double p = 0.0;
};

struct ExplainedVariance {
  double percent = 0.0;  // 100 R^2
  bool rank_deficient = false;
  std::size_t rank = 0;  // of the design including the intercept
  std::size_t n = 0;
  double residual_ss = 0.0;
  double total_ss = 0.0;
  std::vector<TermSS> terms;
};

// OLS of target on the features plus an intercept. Needs at least as many
// rows as parameters. Collinear designs use the minimum-norm solution and
// are flagged. A constant target has zero total variance; its percent is 0.
ExplainedVariance explained_variance(std::span<const double> target,
                                     const std::vector<std::vector<double>>& features,
                                     const std::vector<std::string>& names = {});

// ---- t-tests ----------------------------------------------------------------

enum class TTestKind { paired, welch };

struct TTestResult {
  double t = 0.0;
  double dof = 0.0;
  double raw_p = 1.0;
  double adj_p = 1.0;
  std::size_t comparisons = 1;
  bool zero_variance = false;  // t is 0 (equal means) or infinite
};

double bonferroni(double p, std::size_t comparisons);

// Two-tailed test on a - b. Paired uses the differences with n - 1 dof;
// Welch treats the samples as independent with Satterthwaite dof.
TTestResult paired_ttest_bonferroni(std::span<const double> a, std::span<const double> b, std::size_t comparisons,
                                    TTestKind kind = TTestKind::paired);

// ---- silhouette -------------------------------------------------------------

using Point2 = std::array<double, 2>;

// Mean silhouette with Euclidean distance. Points alone in their cluster
// score 0. Needs >= 3 points and >= 2 clusters.
double silhouette(std::span<const Point2> points, std::span<const int> labels);

// ---- score table ------------------------------------------------------------

inline constexpr std::size_t kGptScoreItems = 9;

struct ScoreRow {
  std::string id;
  std::string embedding;
  ExplanationKind kind = ExplanationKind::rationale;
  Label label = Label::entailment;
  std::optional<double> relevance_nats;
  std::optional<double> informativeness_nats;
  std::optional<double> type_overlap_ratio;
  std::optional<double> edit_distance_ratio;
  std::optional<double> cosine_similarity;
  std::array<std::optional<double>, kGptScoreItems> gptscore{};  // evaluation_items() order
};

struct ScoreTable {
  std::vector<ScoreRow> rows;

  // Throws InvalidInput on a repeated (id, embedding, kind).
  void validate() const;
  std::vector<std::string> embeddings() const;      // sorted, unique
  std::vector<ExplanationKind> kinds() const;        // rationale first
};

// Column names in file order. Missing values are written as NA.
std::vector<std::string> score_table_columns();
void write_score_table(const std::filesystem::path& path, const ScoreTable& table);
ScoreTable read_score_table(const std::filesystem::path& path);

// Named numeric column accessor ("relevance_nats", "cosine_similarity",
// "coherence", ...). Throws InvalidInput on an unknown name.
std::optional<double> score_column(const ScoreRow& row, std::string_view name);
std::vector<std::string> numeric_score_columns();

// ---- aggregate analyses -----------------------------------------------------

struct SummaryStat {
  std::string embedding;
  ExplanationKind kind;
  std::string score;  // any numeric score column
  std::size_t n = 0;
  double mean = 0.0;
  double stdev = 0.0;  // sample form; NaN for n < 2
};

// Mean and stdev of every numeric column per (embedding, kind), over the
// rows where the column is present.
std::vector<SummaryStat> summarize(const ScoreTable& table);

struct CorrelationCell {
  ExplanationKind kind;
  std::string embedding;
  std::string row;
  std::string col;
  SpearmanResult result;
};

// Spearman over every pair of numeric columns per (embedding, kind), using
// rows where both values are present.
std::vector<CorrelationCell> correlation_matrix(const ScoreTable& table);

struct CategoryVariance {
  std::string embedding;
  ExplanationKind kind;
  std::string target;
  std::string category;
  std::vector<std::string> features;
  ExplainedVariance fit;
};

struct Category {
  std::string name;
  std::vector<std::string> features;
};

// lexical_semantics (edit ratio, cosine), lexical_semantics_3 (adds type
// overlap), reasoning, clarity and relevance.
std::vector<Category> variance_categories();

// Per (embedding, kind, target, category). Rows with a missing feature or
// target are skipped; a category with too few complete rows is omitted.
std::vector<CategoryVariance> category_explained_variance(const ScoreTable& table);

struct EmbeddingComparison {
  ExplanationKind kind;
  std::string score;
  std::string a;
  std::string b;
  double mean_a = 0.0;
  double mean_b = 0.0;
  TTestResult test;
};

// All embedding pairs per (kind, score), paired by id over rows present for
// both. Bonferroni count is the number of pairs in the family.
std::vector<EmbeddingComparison> compare_embeddings(const ScoreTable& table, TTestKind kind = TTestKind::paired);

struct SilhouetteResult {
  std::string embedding;
  ExplanationKind kind;
  std::size_t n = 0;
  std::optional<double> coefficient;  // nullopt when fewer than 3 points or 1 cluster
};

// Points are (relevance, informativeness); clusters are gold labels.
std::vector<SilhouetteResult> label_silhouettes(const ScoreTable& table);

struct Extreme {
  std::string embedding;
  ExplanationKind kind;
  std::string score;
  std::string end;  // top | bottom
  std::size_t rank = 0;
  std::string id;
  double value = 0.0;
};

// k highest and k lowest rows by each score per (embedding, kind). Ties
// break on id.
std::vector<Extreme> extremes(const ScoreTable& table, std::size_t k);

}  // namespace xchan
