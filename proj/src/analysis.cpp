#include "xchan/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

#include "xchan/csv.hpp"
#include "xchan/errors.hpp"
#include "xchan/gptscore.hpp"

namespace xchan {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Continued fraction for I_x(a, b); x < (a + 1) / (a + b + 2) assumed.
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 100000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw NumericError("incomplete beta: continued fraction did not converge");
}

// I_x(a, b) with y = 1 - x supplied separately so neither tail loses digits.
double incomplete_beta_xy(double a, double b, double x, double y) {
  if (x <= 0.0) return 0.0;
  if (y <= 0.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log(y);
  if (x < (a + 1.0) / (a + b + 2.0)) return std::exp(log_front) * beta_cf(a, b, x) / a;
  return 1.0 - std::exp(log_front) * beta_cf(b, a, y) / b;
}

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw InvalidInput(std::string(what) + ": inputs differ in length");
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Sum of squared deviations from the mean, two-pass.
double centered_ss(std::span<const double> v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s;
}

struct GroupKey {
  std::string embedding;
  ExplanationKind kind;
  bool operator<(const GroupKey& o) const {
    return std::tie(kind, embedding) < std::tie(o.kind, o.embedding);
  }
};

std::map<GroupKey, std::vector<const ScoreRow*>> group_rows(const ScoreTable& table) {
  std::map<GroupKey, std::vector<const ScoreRow*>> groups;
  for (const auto& row : table.rows) groups[{row.embedding, row.kind}].push_back(&row);
  return groups;
}

const std::vector<std::string>& target_columns() {
  static const std::vector<std::string> cols = {"relevance_nats", "informativeness_nats"};
  return cols;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw InvalidInput("incomplete_beta: a and b must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw InvalidInput("incomplete_beta: x outside [0, 1]");
  return incomplete_beta_xy(a, b, x, 1.0 - x);
}

double student_t_two_sided_p(double t, double dof) {
  if (!(dof > 0.0)) throw InvalidInput("student t: dof must be positive");
  if (std::isnan(t)) return kNaN;
  if (std::isinf(t)) return 0.0;
  const double t2 = t * t;
  return incomplete_beta_xy(0.5 * dof, 0.5, dof / (dof + t2), t2 / (dof + t2));
}

double student_t_cdf(double t, double dof) {
  const double tail = 0.5 * student_t_two_sided_p(t, dof);
  return t > 0.0 ? 1.0 - tail : tail;
}

double f_distribution_sf(double f, double df1, double df2) {
  if (!(df1 > 0.0 && df2 > 0.0)) throw InvalidInput("F distribution: dof must be positive");
  if (std::isnan(f)) return kNaN;
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  const double denom = df2 + df1 * f;
  return incomplete_beta_xy(0.5 * df2, 0.5 * df1, df2 / denom, df1 * f / denom);
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return values[i] < values[j]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (auto k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

SpearmanResult spearman(std::span<const double> xs, std::span<const double> ys) {
  require_same_length(xs.size(), ys.size(), "spearman");
  if (xs.size() < 3) throw InvalidInput("spearman: need at least 3 pairs");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) throw InvalidInput("spearman: non-finite value");
  }
  SpearmanResult out;
  out.n = xs.size();
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double mx = mean_of(rx), my = mean_of(ry);
  const double sxx = centered_ss(rx, mx), syy = centered_ss(ry, my);
  if (sxx == 0.0 || syy == 0.0) {
    out.defined = false;
    out.rho = out.p = kNaN;
    return out;
  }
  double sxy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) sxy += (rx[i] - mx) * (ry[i] - my);
  out.rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double dof = static_cast<double>(out.n) - 2.0;
  const double one_minus = 1.0 - out.rho * out.rho;
  out.p = one_minus <= 0.0 ? 0.0 : student_t_two_sided_p(out.rho * std::sqrt(dof / one_minus), dof);
  return out;
}

ExplainedVariance explained_variance(std::span<const double> target, const std::vector<std::vector<double>>& features,
                                     const std::vector<std::string>& names) {
  const auto n = target.size();
  const auto k = features.size();
  if (!names.empty() && names.size() != k) throw InvalidInput("explained_variance: one name per feature");
  for (const auto& f : features) require_same_length(f.size(), n, "explained_variance");
  if (n < k + 1) throw InvalidInput("explained_variance: fewer rows than parameters");
  for (double v : target) {
    if (!std::isfinite(v)) throw InvalidInput("explained_variance: non-finite target");
  }

  const auto rows = static_cast<Eigen::Index>(n);
  const Eigen::Map<const Eigen::VectorXd> y(target.data(), rows);

  // Residual SS and rank using the intercept plus the listed columns.
  // Features are centered and scaled to unit norm first (same column space)
  // so rank detection does not depend on feature units or offsets.
  auto fit = [&](const std::vector<std::size_t>& cols) {
    Eigen::MatrixXd x(rows, static_cast<Eigen::Index>(cols.size()) + 1);
    x.col(0).setOnes();
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const auto& f = features[cols[c]];
      for (Eigen::Index r = 0; r < rows; ++r) {
        if (!std::isfinite(f[static_cast<std::size_t>(r)])) throw InvalidInput("explained_variance: non-finite feature");
        x(r, static_cast<Eigen::Index>(c) + 1) = f[static_cast<std::size_t>(r)];
      }
    }
    x.col(0) /= std::sqrt(static_cast<double>(rows));
    for (Eigen::Index c = 1; c < x.cols(); ++c) {
      const double raw = x.col(c).norm();
      x.col(c).array() -= x.col(c).mean();
      const double norm = x.col(c).norm();
      if (norm <= 1e-12 * raw) {
        x.col(c).setZero();
      } else {
        x.col(c) /= norm;
      }
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(x);
    const Eigen::VectorXd beta = cod.solve(y);
    const double rss = (y - x * beta).squaredNorm();
    return std::pair<double, std::size_t>(rss, static_cast<std::size_t>(cod.rank()));
  };

  ExplainedVariance out;
  out.n = n;
  const double ybar = mean_of(target);
  out.total_ss = centered_ss(target, ybar);

  std::vector<std::size_t> all(k);
  std::iota(all.begin(), all.end(), 0);
  const auto [rss, rank] = fit(all);
  out.rank = rank;
  out.rank_deficient = rank < k + 1;
  out.residual_ss = out.total_ss > 0.0 ? std::min(rss, out.total_ss) : rss;
  out.percent = out.total_ss > 0.0 ? 100.0 * std::max(0.0, 1.0 - out.residual_ss / out.total_ss) : 0.0;

  const double resid_dof = static_cast<double>(n) - static_cast<double>(rank);
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<std::size_t> rest;
    for (auto c : all) {
      if (c != j) rest.push_back(c);
    }
    TermSS term;
    term.name = names.empty() ? "x" + std::to_string(j + 1) : names[j];
    const auto [rss_without, rank_without] = fit(rest);
    term.sum_sq = std::max(0.0, rss_without - out.residual_ss);
    const double df_term = static_cast<double>(rank) - static_cast<double>(rank_without);
    if (resid_dof > 0.0 && df_term > 0.0 && out.residual_ss > 0.0) {
      term.f = (term.sum_sq / df_term) / (out.residual_ss / resid_dof);
      term.p = f_distribution_sf(term.f, df_term, resid_dof);
    } else {
      term.f = term.p = kNaN;
    }
    out.terms.push_back(std::move(term));
  }
  return out;
}

double bonferroni(double p, std::size_t comparisons) {
  if (comparisons < 1) throw InvalidInput("bonferroni: need at least one comparison");
  return std::min(1.0, p * static_cast<double>(comparisons));
}

TTestResult paired_ttest_bonferroni(std::span<const double> a, std::span<const double> b, std::size_t comparisons,
                                    TTestKind kind) {
  if (comparisons < 1) throw InvalidInput("t-test: need at least one comparison");
  TTestResult out;
  out.comparisons = comparisons;
  double mean_diff = 0.0, se2 = 0.0;

  if (kind == TTestKind::paired) {
    require_same_length(a.size(), b.size(), "paired t-test");
    if (a.size() < 2) throw InvalidInput("paired t-test: need at least 2 pairs");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    const double n = static_cast<double>(d.size());
    mean_diff = mean_of(d);
    se2 = centered_ss(d, mean_diff) / (n - 1.0) / n;
    out.dof = n - 1.0;
  } else {
    if (a.size() < 2 || b.size() < 2) throw InvalidInput("Welch t-test: need at least 2 values per sample");
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double ma = mean_of(a), mb = mean_of(b);
    const double va = centered_ss(a, ma) / (na - 1.0) / na;
    const double vb = centered_ss(b, mb) / (nb - 1.0) / nb;
    mean_diff = ma - mb;
    se2 = va + vb;
    out.dof = se2 > 0.0 ? se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0)) : na + nb - 2.0;
  }

  if (se2 == 0.0) {
    out.zero_variance = true;
    out.t = mean_diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), mean_diff);
    out.raw_p = mean_diff == 0.0 ? 1.0 : 0.0;
  } else {
    out.t = mean_diff / std::sqrt(se2);
    out.raw_p = student_t_two_sided_p(out.t, out.dof);
  }
  out.adj_p = bonferroni(out.raw_p, comparisons);
  return out;
}

double silhouette(std::span<const Point2> points, std::span<const int> labels) {
  require_same_length(points.size(), labels.size(), "silhouette");
  if (points.size() < 3) throw InvalidInput("silhouette: need at least 3 points");
  std::map<int, std::size_t> sizes;
  for (int l : labels) ++sizes[l];
  if (sizes.size() < 2) throw InvalidInput("silhouette: need at least 2 clusters");

  const auto n = points.size();
  double total = 0.0;
  std::map<int, double> sums;
  for (std::size_t i = 0; i < n; ++i) {
    if (sizes[labels[i]] == 1) continue;
    for (auto& [_, s] : sums) s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sums[labels[j]] += std::hypot(points[i][0] - points[j][0], points[i][1] - points[j][1]);
    }
    const double a = sums[labels[i]] / static_cast<double>(sizes[labels[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [label, size] : sizes) {
      if (label != labels[i]) b = std::min(b, sums[label] / static_cast<double>(size));
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return std::clamp(total / static_cast<double>(n), -1.0, 1.0);
}

// ---- score table ------------------------------------------------------------

void ScoreTable::validate() const {
  std::set<std::tuple<std::string, std::string, ExplanationKind>> seen;
  for (const auto& row : rows) {
    if (!seen.emplace(row.id, row.embedding, row.kind).second) {
      throw InvalidInput("score table: duplicate row for id '" + row.id + "', embedding '" + row.embedding +
                         "', kind " + std::string(to_string(row.kind)));
    }
  }
}

std::vector<std::string> ScoreTable::embeddings() const {
  std::set<std::string> names;
  for (const auto& row : rows) names.insert(row.embedding);
  return {names.begin(), names.end()};
}

std::vector<ExplanationKind> ScoreTable::kinds() const {
  std::set<ExplanationKind> kinds;
  for (const auto& row : rows) kinds.insert(row.kind);
  return {kinds.begin(), kinds.end()};
}

std::vector<std::string> numeric_score_columns() {
  std::vector<std::string> cols = {"relevance_nats", "informativeness_nats", "type_overlap_ratio",
                                   "edit_distance_ratio", "cosine_similarity"};
  for (const auto& item : evaluation_items()) cols.emplace_back(item.name);
  return cols;
}

std::vector<std::string> score_table_columns() {
  std::vector<std::string> cols = {"id", "embedding", "kind", "label"};
  for (auto& c : numeric_score_columns()) cols.push_back(std::move(c));
  return cols;
}

std::optional<double> score_column(const ScoreRow& row, std::string_view name) {
  if (name == "relevance_nats") return row.relevance_nats;
  if (name == "informativeness_nats") return row.informativeness_nats;
  if (name == "type_overlap_ratio") return row.type_overlap_ratio;
  if (name == "edit_distance_ratio") return row.edit_distance_ratio;
  if (name == "cosine_similarity") return row.cosine_similarity;
  const auto items = evaluation_items();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].name == name) return row.gptscore[i];
  }
  throw InvalidInput("unknown score column '" + std::string(name) + "'");
}

void write_score_table(const std::filesystem::path& path, const ScoreTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << csv_join(score_table_columns()) << '\n';
  const auto numeric = numeric_score_columns();
  for (const auto& row : table.rows) {
    std::vector<std::string> cells = {row.id, row.embedding, std::string(to_string(row.kind)),
                                      std::string(to_string(row.label))};
    for (const auto& col : numeric) cells.push_back(format_number(score_column(row, col)));
    out << csv_join(cells) << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

ScoreTable read_score_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact(path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "score table is empty");
  const auto header = csv_split(line);
  if (header != score_table_columns()) throw ParseError(1, "unexpected score table header");
  const auto items = evaluation_items();
  ScoreTable table;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    const auto cells = csv_split(line);
    if (cells.size() != header.size()) throw ParseError(lineno, "expected " + std::to_string(header.size()) + " cells");
    ScoreRow row;
    row.id = cells[0];
    row.embedding = cells[1];
    const auto kind = parse_kind(cells[2]);
    const auto label = parse_label(cells[3]);
    if (!kind) throw ParseError(lineno, "unknown kind '" + cells[2] + "'");
    if (!label) throw ParseError(lineno, "unknown label '" + cells[3] + "'");
    row.kind = *kind;
    row.label = *label;
    try {
      row.relevance_nats = parse_number(cells[4]);
      row.informativeness_nats = parse_number(cells[5]);
      row.type_overlap_ratio = parse_number(cells[6]);
      row.edit_distance_ratio = parse_number(cells[7]);
      row.cosine_similarity = parse_number(cells[8]);
      for (std::size_t i = 0; i < items.size(); ++i) row.gptscore[i] = parse_number(cells[9 + i]);
    } catch (const InvalidInput& e) {
      throw ParseError(lineno, e.what());
    }
    table.rows.push_back(std::move(row));
  }
  table.validate();
  return table;
}

// ---- aggregate analyses -----------------------------------------------------

std::vector<SummaryStat> summarize(const ScoreTable& table) {
  std::vector<SummaryStat> out;
  const auto cols = numeric_score_columns();
  for (const auto& [key, rows] : group_rows(table)) {
    for (const auto& score : cols) {
      std::vector<double> v;
      for (const auto* row : rows) {
        if (auto x = score_column(*row, score)) v.push_back(*x);
      }
      SummaryStat s{key.embedding, key.kind, score, v.size(), kNaN, kNaN};
      if (!v.empty()) s.mean = mean_of(v);
      if (v.size() >= 2) s.stdev = std::sqrt(centered_ss(v, s.mean) / static_cast<double>(v.size() - 1));
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<CorrelationCell> correlation_matrix(const ScoreTable& table) {
  const auto cols = numeric_score_columns();
  std::vector<CorrelationCell> out;
  for (const auto& [key, rows] : group_rows(table)) {
    for (const auto& a : cols) {
      for (const auto& b : cols) {
        std::vector<double> xs, ys;
        for (const auto* row : rows) {
          const auto x = score_column(*row, a);
          const auto y = score_column(*row, b);
          if (x && y) {
            xs.push_back(*x);
            ys.push_back(*y);
          }
        }
        CorrelationCell cell{key.kind, key.embedding, a, b, {}};
        if (xs.size() >= 3) {
          cell.result = spearman(xs, ys);
        } else {
          cell.result = {kNaN, kNaN, xs.size(), false};
        }
        out.push_back(std::move(cell));
      }
    }
  }
  return out;
}

std::vector<Category> variance_categories() {
  return {
      {"lexical_semantics", {"edit_distance_ratio", "cosine_similarity"}},
      {"lexical_semantics_3", {"type_overlap_ratio", "edit_distance_ratio", "cosine_similarity"}},
      {"reasoning", {"informativeness", "causal_support", "convincingness", "coherence"}},
      {"clarity", {"clarity4student", "clarity4graduate"}},
      {"relevance", {"label_relevance", "input_relevance", "importance"}},
  };
}

std::vector<CategoryVariance> category_explained_variance(const ScoreTable& table) {
  std::vector<CategoryVariance> out;
  const auto categories = variance_categories();
  for (const auto& [key, rows] : group_rows(table)) {
    for (const auto& target : target_columns()) {
      for (const auto& cat : categories) {
        std::vector<double> y;
        std::vector<std::vector<double>> x(cat.features.size());
        for (const auto* row : rows) {
          const auto t = score_column(*row, target);
          if (!t) continue;
          std::vector<double> vals;
          for (const auto& f : cat.features) {
            if (auto v = score_column(*row, f)) vals.push_back(*v);
          }
          if (vals.size() != cat.features.size()) continue;
          y.push_back(*t);
          for (std::size_t j = 0; j < vals.size(); ++j) x[j].push_back(vals[j]);
        }
        if (y.size() < cat.features.size() + 2) continue;
        out.push_back({key.embedding, key.kind, target, cat.name, cat.features,
                       explained_variance(y, x, cat.features)});
      }
    }
  }
  return out;
}

std::vector<EmbeddingComparison> compare_embeddings(const ScoreTable& table, TTestKind kind) {
  std::vector<EmbeddingComparison> out;
  const auto embeddings = table.embeddings();
  if (embeddings.size() < 2) return out;
  const auto groups = group_rows(table);
  for (auto ek : table.kinds()) {
    for (const auto& score : target_columns()) {
      std::vector<EmbeddingComparison> family;
      for (std::size_t i = 0; i < embeddings.size(); ++i) {
        for (std::size_t j = i + 1; j < embeddings.size(); ++j) {
          const auto ga = groups.find({embeddings[i], ek});
          const auto gb = groups.find({embeddings[j], ek});
          if (ga == groups.end() || gb == groups.end()) continue;
          std::map<std::string, double> bvals;
          for (const auto* row : gb->second) {
            if (auto v = score_column(*row, score)) bvals[row->id] = *v;
          }
          std::vector<double> a, b;
          for (const auto* row : ga->second) {
            const auto v = score_column(*row, score);
            const auto it = bvals.find(row->id);
            if (v && it != bvals.end()) {
              a.push_back(*v);
              b.push_back(it->second);
            }
          }
          if (a.size() < 2) continue;
          EmbeddingComparison cmp{ek, score, embeddings[i], embeddings[j], mean_of(a), mean_of(b), {}};
          cmp.test = paired_ttest_bonferroni(a, b, 1, kind);
          family.push_back(std::move(cmp));
        }
      }
      for (auto& cmp : family) {
        cmp.test.comparisons = family.size();
        cmp.test.adj_p = bonferroni(cmp.test.raw_p, family.size());
        out.push_back(std::move(cmp));
      }
    }
  }
  return out;
}

std::vector<SilhouetteResult> label_silhouettes(const ScoreTable& table) {
  std::vector<SilhouetteResult> out;
  for (const auto& [key, rows] : group_rows(table)) {
    std::vector<Point2> points;
    std::vector<int> labels;
    for (const auto* row : rows) {
      if (row->relevance_nats && row->informativeness_nats) {
        points.push_back({*row->relevance_nats, *row->informativeness_nats});
        labels.push_back(static_cast<int>(row->label));
      }
    }
    SilhouetteResult r{key.embedding, key.kind, points.size(), std::nullopt};
    const std::set<int> distinct(labels.begin(), labels.end());
    if (points.size() >= 3 && distinct.size() >= 2) r.coefficient = silhouette(points, labels);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<Extreme> extremes(const ScoreTable& table, std::size_t k) {
  std::vector<Extreme> out;
  for (const auto& [key, rows] : group_rows(table)) {
    for (const auto& score : target_columns()) {
      std::vector<std::pair<double, const std::string*>> vals;
      for (const auto* row : rows) {
        if (auto v = score_column(*row, score)) vals.emplace_back(*v, &row->id);
      }
      auto emit = [&](const std::string& end, auto cmp) {
        auto sorted = vals;
        std::sort(sorted.begin(), sorted.end(), cmp);
        for (std::size_t r = 0; r < std::min(k, sorted.size()); ++r) {
          out.push_back({key.embedding, key.kind, score, end, r + 1, *sorted[r].second, sorted[r].first});
        }
      };
      emit("top", [](const auto& x, const auto& y) {
        return x.first != y.first ? x.first > y.first : *x.second < *y.second;
      });
      emit("bottom", [](const auto& x, const auto& y) {
        return x.first != y.first ? x.first < y.first : *x.second < *y.second;
      });
    }
  }
  return out;
}

}  // namespace xchan
