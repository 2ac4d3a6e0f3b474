#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xchan {

// Lowercases ASCII, splits on whitespace and strips leading/trailing ASCII
// punctuation from each token. Tokens that become empty are dropped.
std::vector<std::string> tokenize(std::string_view text);

// Fraction of the input's word types that also occur in the explanan.
double type_overlap_ratio(std::string_view input_text, std::string_view explanan);

// Unit-cost Levenshtein distance over arbitrary sequences.
template <typename T>
std::size_t levenshtein(std::span<const T> a, std::span<const T> b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({sub, up + 1, row[j - 1] + 1});
      diag = up;
    }
  }
  return row[b.size()];
}

enum class EditUnit { token, character };

// Edit distance from input to explanan divided by the input's length, in
// tokens (default) or in code points.
double edit_distance_ratio(std::string_view input_text, std::string_view explanan,
                           EditUnit unit = EditUnit::token);

double cosine_similarity(std::span<const double> x, std::span<const double> e);
double cosine_similarity(std::span<const float> x, std::span<const float> e);

struct SilverLabels {
  std::string id;
  double type_overlap_ratio = 0.0;
  double edit_distance_ratio = 0.0;
  double cosine_similarity = 0.0;
};

}  // namespace xchan
