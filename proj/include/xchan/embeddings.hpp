#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "xchan/http.hpp"
#include "xchan/record_store.hpp"

namespace xchan {

struct EmbeddingVector {
  std::vector<float> values;
  std::string provider;
  std::string model;

  std::size_t dim() const { return values.size(); }
};

struct EmbeddingCacheKey {
  std::string provider;
  std::string model;
  std::string text_digest;  // sha256 hex of the exact text

  static EmbeddingCacheKey of(std::string_view provider, std::string_view model, std::string_view text);
  std::string str() const;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::string name() const = 0;
  virtual std::string model() const = 0;
  virtual std::size_t batch_size() const { return 64; }
  virtual std::size_t max_parallel() const { return 1; }

  // One round trip for at most batch_size() texts. May throw TransportError.
  virtual std::vector<std::vector<float>> fetch(std::span<const std::string> texts) = 0;

  std::uint64_t calls() const { return calls_.load(); }

 protected:
  void count_call() { ++calls_; }

 private:
  std::atomic<std::uint64_t> calls_{0};
};

// Offline provider: the text's hash seeds a generator whose normal draws,
// normalized, form the vector. Identical texts give identical vectors;
// distinct texts give unrelated ones.
class HashEmbeddingProvider : public EmbeddingProvider {
 public:
  HashEmbeddingProvider(std::size_t dim, std::uint64_t seed = 0);
  std::string name() const override { return "hash"; }
  std::string model() const override;
  std::vector<std::vector<float>> fetch(std::span<const std::string> texts) override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

// Offline provider with lexical structure: sum of per-token hashed vectors,
// normalized. Texts sharing words get correlated vectors, so relevance and
// cosine scores on fixtures are not all noise. Text with no tokens falls
// back to the plain hash vector.
class BagOfWordsHashProvider : public EmbeddingProvider {
 public:
  BagOfWordsHashProvider(std::size_t dim, std::uint64_t seed = 0);
  std::string name() const override { return "bow-hash"; }
  std::string model() const override;
  std::vector<std::vector<float>> fetch(std::span<const std::string> texts) override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

struct RemoteProviderConfig {
  std::string name = "openai";
  Endpoint endpoint{"https://api.openai.com/v1", "", std::chrono::seconds(60)};
  std::string model = "text-embedding-ada-002";
  std::size_t batch_size = 64;
  std::size_t max_parallel = 4;
  RetryPolicy retry;
};

// OpenAI-compatible embeddings endpoint: POST {base}/embeddings with
// {"model", "input": [texts]}; reads data[i].embedding, ordered by data[i].index.
class RemoteEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit RemoteEmbeddingProvider(RemoteProviderConfig config);
  std::string name() const override { return config_.name; }
  std::string model() const override { return config_.model; }
  std::size_t batch_size() const override { return config_.batch_size; }
  std::size_t max_parallel() const override { return config_.max_parallel; }
  std::vector<std::vector<float>> fetch(std::span<const std::string> texts) override;

 private:
  RemoteProviderConfig config_;
};

// Chunks `texts` by the provider's batch size and validates the result:
// one vector per text, a single shared dimension, finite entries.
std::vector<EmbeddingVector> embed_batch(EmbeddingProvider& provider, std::span<const std::string> texts);

struct CacheStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t corrupt = 0;
};

class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path data_path) : store_(std::move(data_path)) {}

  // nullopt on miss; a corrupt entry counts in stats() and reads as a miss.
  std::optional<EmbeddingVector> get(const EmbeddingCacheKey& key);
  void put(const EmbeddingCacheKey& key, const EmbeddingVector& vec);

  const CacheStats& stats() const { return stats_; }
  RecordStore& store() { return store_; }

 private:
  RecordStore store_;
  CacheStats stats_;
};

EmbeddingVector cached_embed(EmbeddingProvider& provider, const std::string& text, EmbeddingCache& cache);

// Batch form: deduplicates misses and fetches them through embed_batch.
std::vector<EmbeddingVector> cached_embed_all(EmbeddingProvider& provider, std::span<const std::string> texts,
                                              EmbeddingCache& cache);

std::string encode_vector(std::span<const float> values);
std::vector<float> decode_vector(std::string_view bytes);

}  // namespace xchan
