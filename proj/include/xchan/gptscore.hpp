#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xchan/corpus.hpp"
#include "xchan/http.hpp"
#include "xchan/record_store.hpp"

namespace xchan {

enum class ItemCategory { reasoning, clarity, relevance };
std::string_view to_string(ItemCategory category);

struct EvaluationItem {
  ItemCategory category;
  std::string_view name;
  std::string_view statement;
};

// The nine evaluation statements, in table order.
std::span<const EvaluationItem> evaluation_items();
const EvaluationItem& evaluation_item(std::string_view name);

enum class Likert { strongly_disagree, somewhat_disagree, somewhat_agree, strongly_agree };

// -2, -1, 1, 2. There is no neutral point.
int likert_value(Likert response);
std::string_view likert_phrase(Likert response);

struct LikertResponse {
  std::string raw;
  std::optional<Likert> parsed;  // nullopt: the response could not be parsed

  bool ok() const { return parsed.has_value(); }
  std::optional<int> numeric() const {
    return parsed ? std::optional<int>(likert_value(*parsed)) : std::nullopt;
  }
};

std::string build_gptscore_prompt(const ExplanationRecord& record, const EvaluationItem& item);

// Strips surrounding whitespace, quotes, brackets and trailing periods,
// casefolds, collapses inner whitespace, then matches one of the four
// phrases.
LikertResponse parse_likert(std::string_view raw);

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual std::string id() const = 0;
  virtual std::size_t max_parallel() const { return 1; }
  // May throw TransportError.
  virtual std::string complete(const std::string& prompt) = 0;

  std::uint64_t calls() const { return calls_.load(); }

 protected:
  void count_call() { ++calls_; }

 private:
  std::atomic<std::uint64_t> calls_{0};
};

// Deterministic stand-in: the answer is a seeded function of the prompt.
// A small share of answers come wrapped in parentheses or trailing newlines
// so the postprocessing path is exercised; `garbage_rate` of them are
// unparseable.
class MockBackend : public CompletionBackend {
 public:
  explicit MockBackend(std::uint64_t seed = 0, double garbage_rate = 0.0) : seed_(seed), garbage_rate_(garbage_rate) {}
  std::string id() const override { return "mock-s" + std::to_string(seed_); }
  std::string complete(const std::string& prompt) override;

 private:
  std::uint64_t seed_;
  double garbage_rate_;
};

struct RemoteBackendConfig {
  Endpoint endpoint{"https://api.openai.com/v1", "", std::chrono::seconds(60)};
  std::string model = "gpt-3.5-turbo-instruct";
  bool chat = false;  // /chat/completions instead of /completions
  std::size_t max_parallel = 4;
  int max_tokens = 16;
  RetryPolicy retry;
};

// OpenAI-compatible completion endpoint, temperature 0, one completion.
class RemoteBackend : public CompletionBackend {
 public:
  explicit RemoteBackend(RemoteBackendConfig config) : config_(std::move(config)) {}
  std::string id() const override { return (config_.chat ? "chat:" : "completion:") + config_.model; }
  std::size_t max_parallel() const override { return config_.max_parallel; }
  std::string complete(const std::string& prompt) override;

 private:
  RemoteBackendConfig config_;
};

// Response cache in the shared record-store format, namespace "gpt|".
// Entries are keyed by backend, item and record id; the rendered prompt is
// folded into the key so a rationale and an NLE for the same instance id
// never collide.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path data_path) : store_(std::move(data_path)) {}
  std::optional<std::string> get(const ExplanationRecord& record, const EvaluationItem& item,
                                 const std::string& backend_id);
  void put(const ExplanationRecord& record, const EvaluationItem& item, const std::string& backend_id,
           const std::string& response);
  RecordStore& store() { return store_; }

 private:
  static std::string key(const ExplanationRecord& record, const EvaluationItem& item, const std::string& backend_id);
  RecordStore store_;
};

struct GptScoreRow {
  std::string id;
  std::vector<std::optional<int>> values;  // aligned with GptScoreTable::items
  std::vector<std::string> raw;
};

struct GptScoreTable {
  std::vector<std::string> items;
  std::vector<GptScoreRow> rows;
  std::size_t parse_failures = 0;
  std::size_t transport_failures = 0;
  std::uint64_t backend_calls = 0;
};

// One numeric per (record, item). Responses are cached by (record id, item,
// backend id); transport failures (after the backend's retries) and
// unparseable responses are counted and left empty. Failed calls are not
// cached.
GptScoreTable score_records(std::span<const ExplanationRecord> records, std::span<const EvaluationItem> items,
                            CompletionBackend& backend, ResponseCache& cache);

}  // namespace xchan
