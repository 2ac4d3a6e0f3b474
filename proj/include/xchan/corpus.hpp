#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xchan {

enum class Label { contradiction = 0, entailment = 1, neutral = 2 };
inline constexpr int kNumLabels = 3;

enum class ExplanationKind { rationale, nle };

std::string_view to_string(Label label);
std::string_view to_string(ExplanationKind kind);
std::optional<Label> parse_label(std::string_view text);
std::optional<ExplanationKind> parse_kind(std::string_view text);

// One task instance: premise S1, hypothesis S2, label L and its explanan E.
struct ExplanationRecord {
  std::string id;
  std::string premise;
  std::string hypothesis;
  Label label = Label::neutral;
  std::string explanan;
  ExplanationKind kind = ExplanationKind::nle;

  // "S1 S2", the text input X that gets embedded and scored against E.
  std::string input_text() const { return premise + " " + hypothesis; }
};

struct SplitRatios {
  double train = 2.0 / 3.0;
  double validation = 1.0 / 6.0;
  double test = 1.0 / 6.0;
};

struct DatasetSplit {
  std::vector<ExplanationRecord> train;
  std::vector<ExplanationRecord> validation;
  std::vector<ExplanationRecord> test;
  std::uint64_t seed = 0;
  SplitRatios ratios;
};

// Reads a JSON Lines corpus. Records keep file order. A missing `kind`
// field takes `kind`; a present one must agree with it.
std::vector<ExplanationRecord> load_corpus(const std::filesystem::path& path, ExplanationKind kind);
std::vector<ExplanationRecord> parse_corpus(std::istream& in, ExplanationKind kind);

void write_corpus(const std::filesystem::path& path, const std::vector<ExplanationRecord>& records);

// Seeded shuffle, then validation and test take floor(n * ratio) records
// each; the remainder goes to train. Order inside each split follows the
// shuffle.
DatasetSplit split_dataset(const std::vector<ExplanationRecord>& records, SplitRatios ratios,
                           std::uint64_t seed);

// Writes train/validation/test .jsonl plus split_manifest.json into `dir`.
void write_split(const std::filesystem::path& dir, const DatasetSplit& split);
DatasetSplit read_split(const std::filesystem::path& dir, ExplanationKind kind);

std::vector<std::string> whitespace_tokens(std::string_view text);

// Joins tokens with single spaces; dropped tokens become runs of spaces of
// the same character (code point) length, so total length is preserved.
std::string render_rationale(const std::vector<std::string>& tokens, const std::vector<bool>& keep_mask);

// "{S1} {S2} The label is {L} because"
std::string build_nle_prompt(const ExplanationRecord& record);

// Number of UTF-8 code points; invalid lead bytes count as one each.
std::size_t utf8_length(std::string_view text);

}  // namespace xchan
