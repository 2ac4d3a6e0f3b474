#include "xchan/silver_labels.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "xchan/errors.hpp"

namespace xchan {

namespace {

bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::ispunct(u);
}

std::vector<char32_t> code_points(std::string_view s) {
  std::vector<char32_t> out;
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    int len = 1;
    char32_t cp = c;
    if (c >= 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else if (c >= 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if (c >= 0xC0) {
      len = 2;
      cp = c & 0x1F;
    }
    for (int k = 1; k < len && i + static_cast<std::size_t>(k) < s.size(); ++k) {
      cp = (cp << 6) | (static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]) & 0x3F);
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

template <typename T>
double norm_cosine(std::span<const T> x, std::span<const T> e) {
  if (x.size() != e.size()) {
    throw InvalidInput("cosine_similarity: dimension mismatch " + std::to_string(x.size()) + " vs " +
                       std::to_string(e.size()));
  }
  double dot = 0.0, nx = 0.0, ne = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = x[i], b = e[i];
    dot += a * b;
    nx += a * a;
    ne += b * b;
  }
  if (nx == 0.0 || ne == 0.0) throw InvalidInput("cosine_similarity: zero vector");
  const double c = dot / (std::sqrt(nx) * std::sqrt(ne));
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    auto start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    auto end = i;
    while (start < end && is_ascii_punct(text[start])) ++start;
    while (end > start && is_ascii_punct(text[end - 1])) --end;
    if (end > start) {
      std::string tok(text.substr(start, end - start));
      for (auto& c : tok) {
        if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      }
      out.push_back(std::move(tok));
    }
  }
  return out;
}

double type_overlap_ratio(std::string_view input_text, std::string_view explanan) {
  const auto in_tokens = tokenize(input_text);
  const std::set<std::string> input_types(in_tokens.begin(), in_tokens.end());
  if (input_types.empty()) throw InvalidInput("type_overlap_ratio: input has no word types");
  const auto ex_tokens = tokenize(explanan);
  const std::set<std::string> ex_types(ex_tokens.begin(), ex_tokens.end());
  std::size_t shared = 0;
  for (const auto& t : input_types) shared += ex_types.count(t);
  return static_cast<double>(shared) / static_cast<double>(input_types.size());
}

double edit_distance_ratio(std::string_view input_text, std::string_view explanan, EditUnit unit) {
  if (unit == EditUnit::character) {
    const auto a = code_points(input_text);
    const auto b = code_points(explanan);
    if (a.empty()) throw InvalidInput("edit_distance_ratio: empty input");
    return static_cast<double>(levenshtein<char32_t>(a, b)) / static_cast<double>(a.size());
  }
  const auto a = tokenize(input_text);
  const auto b = tokenize(explanan);
  if (a.empty()) throw InvalidInput("edit_distance_ratio: empty input");
  return static_cast<double>(levenshtein<std::string>(a, b)) / static_cast<double>(a.size());
}

double cosine_similarity(std::span<const double> x, std::span<const double> e) { return norm_cosine(x, e); }
double cosine_similarity(std::span<const float> x, std::span<const float> e) { return norm_cosine(x, e); }

}  // namespace xchan
