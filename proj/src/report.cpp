#include "xchan/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "xchan/csv.hpp"
#include "xchan/digest.hpp"
#include "xchan/errors.hpp"

namespace xchan {

namespace {

std::string fixed(double v, const char* fmt) {
  if (!std::isfinite(v)) return format_number(v);
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::string kind_title(ExplanationKind kind) { return kind == ExplanationKind::rationale ? "Rationale" : "NLE"; }

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

class ReportWriter {
 public:
  explicit ReportWriter(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& content) {
    write_text_file(dir_ / name, content);
    files_.push_back({name, sha256_hex(content)});
  }

  std::vector<ReportFile>& files() { return files_; }

 private:
  std::filesystem::path dir_;
  std::vector<ReportFile> files_;
};

std::string summary_csv(const std::vector<SummaryStat>& stats) {
  std::ostringstream out;
  out << "embedding,kind,score,n,mean,stdev\n";
  for (const auto& s : stats) {
    out << csv_join({s.embedding, std::string(to_string(s.kind)), s.score, std::to_string(s.n), format_number(s.mean),
                     format_number(s.stdev)})
        << '\n';
  }
  return out.str();
}

std::string summary_text(const ScoreTable& table, const std::vector<SummaryStat>& stats) {
  std::map<std::tuple<std::string, ExplanationKind, std::string>, const SummaryStat*> by;
  for (const auto& s : stats) by[{s.embedding, s.kind, s.score}] = &s;
  auto mean = [&](const std::string& emb, ExplanationKind k, const std::string& score) -> std::string {
    const auto it = by.find({emb, k, score});
    return it == by.end() || it->second->n == 0 ? "NA" : fixed(it->second->mean, "%.4g");
  };
  auto mean_sd = [&](const std::string& emb, ExplanationKind k, const std::string& score) -> std::string {
    const auto it = by.find({emb, k, score});
    if (it == by.end() || it->second->n == 0) return "NA";
    return fixed(it->second->mean, "%.2f") + " (" + fixed(it->second->stdev, "%.2f") + ")";
  };

  const auto embeddings = table.embeddings();
  const auto kinds = table.kinds();
  constexpr std::size_t kLead = 12, kCell = 12;
  std::ostringstream out;
  out << "Estimated relevance and informativeness (in nats)\n\n";
  const std::size_t block = kCell * embeddings.size();
  out << pad("", kLead) << "| " << pad("I(X;E)", block) << "| I(Y;E)\n";
  out << pad("", kLead) << "| ";
  for (const auto& e : embeddings) out << pad(e, kCell);
  out << "| ";
  for (const auto& e : embeddings) out << pad(e, kCell);
  out << '\n';
  for (auto k : kinds) {
    out << pad(kind_title(k), kLead) << "| ";
    for (const auto& e : embeddings) out << pad(mean(e, k, "relevance_nats"), kCell);
    out << "| ";
    for (const auto& e : embeddings) out << pad(mean(e, k, "informativeness_nats"), kCell);
    out << '\n';
  }

  // Silver labels do not depend on the embedding except for cosine
  // similarity, which gets one line per embedding.
  out << "\nSilver labels, mean (stdev)\n\n";
  constexpr std::size_t kItem = 34, kCol = 18;
  out << pad("Item", kItem);
  for (auto k : kinds) out << pad(kind_title(k), kCol);
  out << '\n';
  const auto& first = embeddings.front();
  for (const auto& col : numeric_score_columns()) {
    if (col == "relevance_nats" || col == "informativeness_nats") continue;
    if (col == "cosine_similarity") {
      for (const auto& e : embeddings) {
        out << pad(col + " [" + e + "]", kItem);
        for (auto k : kinds) out << pad(mean_sd(e, k, col), kCol);
        out << '\n';
      }
      continue;
    }
    out << pad(col, kItem);
    for (auto k : kinds) out << pad(mean_sd(first, k, col), kCol);
    out << '\n';
  }
  return out.str();
}

std::string correlations_csv(const std::vector<CorrelationCell>& cells, ExplanationKind kind) {
  std::ostringstream out;
  out << "embedding,row,col,n,rho,p,defined\n";
  for (const auto& c : cells) {
    if (c.kind != kind) continue;
    out << csv_join({c.embedding, c.row, c.col, std::to_string(c.result.n), format_number(c.result.rho),
                     format_number(c.result.p), c.result.defined ? "true" : "false"})
        << '\n';
  }
  return out.str();
}

std::string scatter_csv(const ScoreTable& table, const std::string& embedding, ExplanationKind kind) {
  std::ostringstream out;
  out << "id,label,relevance_nats,informativeness_nats\n";
  for (const auto& row : table.rows) {
    if (row.embedding != embedding || row.kind != kind) continue;
    out << csv_join({row.id, std::string(to_string(row.label)), format_number(row.relevance_nats),
                     format_number(row.informativeness_nats)})
        << '\n';
  }
  return out.str();
}

std::string tests_csv(const std::vector<EmbeddingComparison>& cmps) {
  std::ostringstream out;
  out << "kind,score,embedding_a,embedding_b,mean_a,mean_b,t,dof,raw_p,adj_p,comparisons,zero_variance\n";
  for (const auto& c : cmps) {
    out << csv_join({std::string(to_string(c.kind)), c.score, c.a, c.b, format_number(c.mean_a),
                     format_number(c.mean_b), format_number(c.test.t), format_number(c.test.dof),
                     format_number(c.test.raw_p), format_number(c.test.adj_p), std::to_string(c.test.comparisons),
                     c.test.zero_variance ? "true" : "false"})
        << '\n';
  }
  return out.str();
}

std::string anova_csv(const std::vector<CategoryVariance>& fits) {
  std::ostringstream out;
  out << "embedding,kind,target,category,n,percent,rank_deficient,term,type2_ss,f,p\n";
  for (const auto& v : fits) {
    for (const auto& term : v.fit.terms) {
      out << csv_join({v.embedding, std::string(to_string(v.kind)), v.target, v.category, std::to_string(v.fit.n),
                       format_number(v.fit.percent), v.fit.rank_deficient ? "true" : "false", term.name,
                       format_number(term.sum_sq), format_number(term.f), format_number(term.p)})
          << '\n';
    }
  }
  return out.str();
}

std::string extremes_csv(const std::vector<Extreme>& rows) {
  std::ostringstream out;
  out << "embedding,kind,score,end,rank,id,value\n";
  for (const auto& e : rows) {
    out << csv_join({e.embedding, std::string(to_string(e.kind)), e.score, e.end, std::to_string(e.rank), e.id,
                     format_number(e.value)})
        << '\n';
  }
  return out.str();
}

std::string silhouette_csv(const std::vector<SilhouetteResult>& rows) {
  std::ostringstream out;
  out << "embedding,kind,n,silhouette\n";
  for (const auto& s : rows) {
    out << csv_join({s.embedding, std::string(to_string(s.kind)), std::to_string(s.n), format_number(s.coefficient)})
        << '\n';
  }
  return out.str();
}

}  // namespace

std::string file_token(std::string_view name) {
  std::string out(name);
  for (auto& c : out) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                    c == '_' || c == '-';
    if (!ok) c = '_';
  }
  return out.empty() ? "_" : out;
}

std::string render_scatter_svg(const ScoreTable& table, const std::string& embedding, ExplanationKind kind) {
  constexpr double kW = 480, kH = 360, kL = 60, kR = 110, kT = 30, kB = 50;
  std::vector<std::pair<Point2, Label>> pts;
  for (const auto& row : table.rows) {
    if (row.embedding == embedding && row.kind == kind && row.relevance_nats && row.informativeness_nats) {
      pts.push_back({{*row.relevance_nats, *row.informativeness_nats}, row.label});
    }
  }
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!pts.empty()) {
    x0 = x1 = pts[0].first[0];
    y0 = y1 = pts[0].first[1];
    for (const auto& [p, _] : pts) {
      x0 = std::min(x0, p[0]), x1 = std::max(x1, p[0]);
      y0 = std::min(y0, p[1]), y1 = std::max(y1, p[1]);
    }
  }
  auto widen = [](double& lo, double& hi) {
    const double span = hi - lo;
    const double m = span > 0 ? 0.05 * span : 0.5;
    lo -= m, hi += m;
  };
  widen(x0, x1);
  widen(y0, y1);
  const double pw = kW - kL - kR, ph = kH - kT - kB;
  auto sx = [&](double x) { return kL + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return kT + (1.0 - (y - y0) / (y1 - y0)) * ph; };
  const char* colours[] = {"#d62728", "#2ca02c", "#1f77b4"};

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" viewBox=\"0 0 "
      << kW << ' ' << kH << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kL << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">" << embedding << " / "
      << to_string(kind) << "</text>\n";
  out << "<rect x=\"" << kL << "\" y=\"" << kT << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = x0 + (x1 - x0) * t / 4.0, yv = y0 + (y1 - y0) * t / 4.0;
    out << "<text x=\"" << fixed(sx(xv), "%.1f") << "\" y=\"" << kH - kB + 16
        << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">" << fixed(xv, "%.3g") << "</text>\n";
    out << "<text x=\"" << kL - 4 << "\" y=\"" << fixed(sy(yv) + 3, "%.1f")
        << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" << fixed(yv, "%.3g") << "</text>\n";
  }
  out << "<text x=\"" << kL + pw / 2 << "\" y=\"" << kH - 12
      << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">relevance I(X;E) (nats)</text>\n";
  out << "<text transform=\"translate(14 " << kT + ph / 2
      << ") rotate(-90)\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">informativeness "
         "I(Y;E) (nats)</text>\n";
  for (const auto& [p, label] : pts) {
    out << "<circle cx=\"" << fixed(sx(p[0]), "%.2f") << "\" cy=\"" << fixed(sy(p[1]), "%.2f")
        << "\" r=\"2.5\" fill-opacity=\"0.6\" fill=\"" << colours[static_cast<int>(label)] << "\"/>\n";
  }
  for (int l = 0; l < kNumLabels; ++l) {
    const double ly = kT + 12 + 18 * l;
    out << "<circle cx=\"" << kW - kR + 14 << "\" cy=\"" << ly << "\" r=\"4\" fill=\"" << colours[l] << "\"/>\n";
    out << "<text x=\"" << kW - kR + 24 << "\" y=\"" << ly + 4 << "\" font-family=\"sans-serif\" font-size=\"11\">"
        << to_string(static_cast<Label>(l)) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::vector<ReportFile> emit_report(const ScoreTable& table, const ReportConfig& config) {
  if (table.rows.empty()) throw InvalidInput("emit_report: empty score table");
  if (config.dir.empty()) throw InvalidInput("emit_report: no output directory");
  table.validate();
  std::filesystem::create_directories(config.dir);
  ReportWriter w(config.dir);

  const auto stats = summarize(table);
  w.write("summary.csv", summary_csv(stats));
  w.write("summary.txt", summary_text(table, stats));

  const auto cells = correlation_matrix(table);
  for (auto k : table.kinds()) {
    w.write("correlations_" + std::string(to_string(k)) + ".csv", correlations_csv(cells, k));
  }
  for (const auto& e : table.embeddings()) {
    for (auto k : table.kinds()) {
      const auto stem = "scatter_" + file_token(e) + "_" + std::string(to_string(k));
      w.write(stem + ".csv", scatter_csv(table, e, k));
      w.write(stem + ".svg", render_scatter_svg(table, e, k));
    }
  }
  w.write("tests.csv", tests_csv(compare_embeddings(table, config.ttest)));
  w.write("anova.csv", anova_csv(category_explained_variance(table)));
  w.write("extremes.csv", extremes_csv(extremes(table, config.extremes_k)));
  w.write("silhouette.csv", silhouette_csv(label_silhouettes(table)));

  nlohmann::ordered_json manifest;
  manifest["format"] = "xchan-report-1";
  manifest["run"] = config.run;
  manifest["extremes_k"] = config.extremes_k;
  manifest["ttest"] = config.ttest == TTestKind::paired ? "paired" : "welch";
  manifest["files"] = nlohmann::ordered_json::array();
  for (const auto& f : w.files()) manifest["files"].push_back({{"path", f.path.generic_string()}, {"sha256", f.sha256}});
  w.write("manifest.json", manifest.dump(2) + "\n");
  return w.files();
}

}  // namespace xchan
