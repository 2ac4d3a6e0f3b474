#include "xchan/corpus.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "xchan/errors.hpp"
#include "xchan/random.hpp"

namespace xchan {

using nlohmann::json;

namespace {

constexpr std::uint64_t kSplitStream = 0x53504c4954;

bool is_blank(std::string_view s) {
  for (unsigned char c : s) {
    if (!std::isspace(c)) return false;
  }
  return true;
}

std::string require_string(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(line, std::string("missing field '") + key + "'");
  if (!it->is_string()) throw ParseError(line, std::string("field '") + key + "' is not a string");
  return it->get<std::string>();
}

json to_json(const ExplanationRecord& r) {
  // Field order is fixed so written files are byte-stable.
  json j = json::object();
  j["id"] = r.id;
  j["premise"] = r.premise;
  j["hypothesis"] = r.hypothesis;
  j["label"] = std::string(to_string(r.label));
  j["explanan"] = r.explanan;
  j["kind"] = std::string(to_string(r.kind));
  return j;
}

std::size_t ratio_count(std::size_t n, double ratio) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratio + 1e-9));
}

}  // namespace

std::string_view to_string(Label label) {
  switch (label) {
    case Label::contradiction: return "contradiction";
    case Label::entailment: return "entailment";
    case Label::neutral: return "neutral";
  }
  return "neutral";
}

std::string_view to_string(ExplanationKind kind) {
  return kind == ExplanationKind::rationale ? "rationale" : "nle";
}

std::optional<Label> parse_label(std::string_view text) {
  if (text == "contradiction") return Label::contradiction;
  if (text == "entailment") return Label::entailment;
  if (text == "neutral") return Label::neutral;
  return std::nullopt;
}

std::optional<ExplanationKind> parse_kind(std::string_view text) {
  if (text == "rationale") return ExplanationKind::rationale;
  if (text == "nle") return ExplanationKind::nle;
  return std::nullopt;
}

std::vector<ExplanationRecord> parse_corpus(std::istream& in, ExplanationKind kind) {
  std::vector<ExplanationRecord> records;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank(line)) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(lineno, "record is not a JSON object");

    ExplanationRecord r;
    r.id = require_string(obj, "id", lineno);
    r.premise = require_string(obj, "premise", lineno);
    r.hypothesis = require_string(obj, "hypothesis", lineno);
    r.explanan = require_string(obj, "explanan", lineno);
    const auto label_text = require_string(obj, "label", lineno);
    auto label = parse_label(label_text);
    if (!label) throw ParseError(lineno, "unknown label '" + label_text + "'");
    r.label = *label;
    r.kind = kind;
    if (auto it = obj.find("kind"); it != obj.end()) {
      auto k = it->is_string() ? parse_kind(it->get<std::string>()) : std::nullopt;
      if (!k) throw ParseError(lineno, "unknown kind " + it->dump());
      if (*k != kind) {
        throw ParseError(lineno, "kind '" + std::string(to_string(*k)) + "' does not match expected '" +
                                     std::string(to_string(kind)) + "'");
      }
    }
    if (r.id.empty()) throw ParseError(lineno, "empty id");
    if (is_blank(r.premise)) throw ParseError(lineno, "blank premise");
    if (is_blank(r.hypothesis)) throw ParseError(lineno, "blank hypothesis");
    if (!seen.insert(r.id).second) throw ParseError(lineno, "duplicate id '" + r.id + "'");
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<ExplanationRecord> load_corpus(const std::filesystem::path& path, ExplanationKind kind) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open corpus " + path.string());
  return parse_corpus(in, kind);
}

void write_corpus(const std::filesystem::path& path, const std::vector<ExplanationRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

DatasetSplit split_dataset(const std::vector<ExplanationRecord>& records, SplitRatios ratios,
                           std::uint64_t seed) {
  if (records.empty()) throw InvalidInput("split_dataset: empty input");
  const double sum = ratios.train + ratios.validation + ratios.test;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw InvalidInput("split_dataset: ratios sum to " + std::to_string(sum) + ", expected 1");
  }
  if (ratios.train < 0 || ratios.validation < 0 || ratios.test < 0) {
    throw InvalidInput("split_dataset: negative ratio");
  }

  Rng rng(derive_seed(seed, kSplitStream));
  const auto order = rng.permutation(records.size());
  const auto n = records.size();
  const auto n_val = ratio_count(n, ratios.validation);
  const auto n_test = ratio_count(n, ratios.test);
  const auto n_train = n - n_val - n_test;

  DatasetSplit split;
  split.seed = seed;
  split.ratios = ratios;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& r = records[order[k]];
    if (k < n_train) {
      split.train.push_back(r);
    } else if (k < n_train + n_val) {
      split.validation.push_back(r);
    } else {
      split.test.push_back(r);
    }
  }
  return split;
}

void write_split(const std::filesystem::path& dir, const DatasetSplit& split) {
  std::filesystem::create_directories(dir);
  write_corpus(dir / "train.jsonl", split.train);
  write_corpus(dir / "validation.jsonl", split.validation);
  write_corpus(dir / "test.jsonl", split.test);
  json manifest = json::object();
  manifest["seed"] = split.seed;
  manifest["ratios"] = {split.ratios.train, split.ratios.validation, split.ratios.test};
  manifest["sizes"] = {split.train.size(), split.validation.size(), split.test.size()};
  std::ofstream out(dir / "split_manifest.json", std::ios::binary);
  out << manifest.dump(2) << '\n';
}

DatasetSplit read_split(const std::filesystem::path& dir, ExplanationKind kind) {
  const auto manifest_path = dir / "split_manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw MissingArtifact(manifest_path.string());
  const auto manifest = json::parse(in);
  DatasetSplit split;
  split.seed = manifest.at("seed").get<std::uint64_t>();
  const auto& ratios = manifest.at("ratios");
  split.ratios = {ratios.at(0).get<double>(), ratios.at(1).get<double>(), ratios.at(2).get<double>()};
  split.train = load_corpus(dir / "train.jsonl", kind);
  split.validation = load_corpus(dir / "validation.jsonl", kind);
  split.test = load_corpus(dir / "test.jsonl", kind);
  return split;
}

std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const auto start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) tokens.emplace_back(text.substr(start, i - start));
  }
  return tokens;
}

std::size_t utf8_length(std::string_view text) {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::string render_rationale(const std::vector<std::string>& tokens, const std::vector<bool>& keep_mask) {
  if (tokens.size() != keep_mask.size()) {
    throw InvalidInput("render_rationale: " + std::to_string(tokens.size()) + " tokens but " +
                       std::to_string(keep_mask.size()) + " mask entries");
  }
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.push_back(' ');
    if (keep_mask[i]) {
      out += tokens[i];
    } else {
      out.append(utf8_length(tokens[i]), ' ');
    }
  }
  return out;
}

std::string build_nle_prompt(const ExplanationRecord& record) {
  if (is_blank(record.premise) || is_blank(record.hypothesis)) {
    throw InvalidInput("build_nle_prompt: premise and hypothesis must be non-empty");
  }
  std::string out = record.premise;
  out += ' ';
  out += record.hypothesis;
  out += " The label is ";
  out += to_string(record.label);
  out += " because";
  return out;
}

}  // namespace xchan
