#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xchan/analysis.hpp"

namespace xchan {

struct ReportConfig {
  std::filesystem::path dir;
  std::size_t extremes_k = 3;
  TTestKind ttest = TTestKind::paired;
  // Copied into manifest.json under "run" (seeds, config hash, providers).
  nlohmann::json run = nlohmann::json::object();
};

struct ReportFile {
  std::filesystem::path path;  // relative to the report directory
  std::string sha256;
};

// Writes summary.csv, summary.txt, correlations_<kind>.csv,
// scatter_<embedding>_<kind>.csv/.svg, tests.csv, anova.csv, extremes.csv,
// silhouette.csv and manifest.json (which lists every other file with its
// digest). Output is byte-stable for a given table and config.
std::vector<ReportFile> emit_report(const ScoreTable& table, const ReportConfig& config);

// Filename-safe form: characters outside [A-Za-z0-9._-] become '_'.
std::string file_token(std::string_view name);

// Relevance/informativeness scatter coloured by label.
std::string render_scatter_svg(const ScoreTable& table, const std::string& embedding, ExplanationKind kind);

}  // namespace xchan
