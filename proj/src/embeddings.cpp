#include "xchan/embeddings.hpp"

#include <cmath>
#include <cstring>
#include <future>
#include <unordered_map>

#include "xchan/digest.hpp"
#include "xchan/errors.hpp"
#include "xchan/random.hpp"
#include "xchan/silver_labels.hpp"

namespace xchan {

namespace {

std::vector<float> seeded_unit_vector(std::uint64_t seed, std::size_t dim) {
  Rng rng(seed);
  std::vector<double> v(dim);
  double norm = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(v[i] / norm);
  return out;
}

}  // namespace

EmbeddingCacheKey EmbeddingCacheKey::of(std::string_view provider, std::string_view model, std::string_view text) {
  return {std::string(provider), std::string(model), sha256_hex(text)};
}

std::string EmbeddingCacheKey::str() const { return "emb|" + provider + "|" + model + "|" + text_digest; }

HashEmbeddingProvider::HashEmbeddingProvider(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim == 0) throw InvalidInput("hash provider: dim must be positive");
}

std::string HashEmbeddingProvider::model() const {
  return "d" + std::to_string(dim_) + "-s" + std::to_string(seed_);
}

std::vector<std::vector<float>> HashEmbeddingProvider::fetch(std::span<const std::string> texts) {
  count_call();
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(seeded_unit_vector(derive_seed(seed_, fnv1a64(t)), dim_));
  return out;
}

BagOfWordsHashProvider::BagOfWordsHashProvider(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim == 0) throw InvalidInput("bow-hash provider: dim must be positive");
}

std::string BagOfWordsHashProvider::model() const {
  return "d" + std::to_string(dim_) + "-s" + std::to_string(seed_);
}

std::vector<std::vector<float>> BagOfWordsHashProvider::fetch(std::span<const std::string> texts) {
  count_call();
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    const auto tokens = tokenize(t);
    if (tokens.empty()) {
      out.push_back(seeded_unit_vector(derive_seed(seed_, fnv1a64(t)), dim_));
      continue;
    }
    std::vector<double> acc(dim_, 0.0);
    for (const auto& tok : tokens) {
      const auto v = seeded_unit_vector(derive_seed(seed_ ^ 0xb0b0, fnv1a64(tok)), dim_);
      for (std::size_t i = 0; i < dim_; ++i) acc[i] += v[i];
    }
    double norm = 0.0;
    for (double x : acc) norm += x * x;
    norm = std::sqrt(norm);
    std::vector<float> vec(dim_);
    for (std::size_t i = 0; i < dim_; ++i) vec[i] = static_cast<float>(norm > 0 ? acc[i] / norm : 0.0);
    out.push_back(std::move(vec));
  }
  return out;
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(RemoteProviderConfig config) : config_(std::move(config)) {
  if (config_.batch_size == 0) throw InvalidInput("remote provider: batch_size must be positive");
  if (config_.max_parallel == 0) config_.max_parallel = 1;
}

std::vector<std::vector<float>> RemoteEmbeddingProvider::fetch(std::span<const std::string> texts) {
  count_call();
  nlohmann::json body = {{"model", config_.model}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
  const auto response =
      with_retry(config_.retry, [&] { return post_json(config_.endpoint, "/embeddings", body); });

  const auto data = response.find("data");
  if (data == response.end() || !data->is_array()) {
    throw TransportError("embeddings response lacks a 'data' array", false);
  }
  std::vector<std::vector<float>> out(data->size());
  for (std::size_t k = 0; k < data->size(); ++k) {
    const auto& item = (*data)[k];
    const auto idx = item.contains("index") ? item.at("index").get<std::size_t>() : k;
    if (idx >= out.size()) throw TransportError("embeddings response index out of range", false);
    out[idx] = item.at("embedding").get<std::vector<float>>();
  }
  return out;
}

std::vector<EmbeddingVector> embed_batch(EmbeddingProvider& provider, std::span<const std::string> texts) {
  if (texts.empty()) throw InvalidInput("embed_batch: empty text list");
  const auto batch = provider.batch_size();
  std::vector<std::span<const std::string>> chunks;
  for (std::size_t start = 0; start < texts.size(); start += batch) {
    chunks.push_back(texts.subspan(start, std::min(batch, texts.size() - start)));
  }

  std::vector<std::vector<std::vector<float>>> results(chunks.size());
  const auto parallel = std::max<std::size_t>(1, provider.max_parallel());
  for (std::size_t first = 0; first < chunks.size(); first += parallel) {
    const auto last = std::min(chunks.size(), first + parallel);
    if (last - first == 1) {
      results[first] = provider.fetch(chunks[first]);
      continue;
    }
    std::vector<std::future<std::vector<std::vector<float>>>> pending;
    for (auto c = first; c < last; ++c) {
      pending.push_back(std::async(std::launch::async, [&provider, chunk = chunks[c]] { return provider.fetch(chunk); }));
    }
    for (auto c = first; c < last; ++c) results[c] = pending[c - first].get();
  }

  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    if (results[c].size() != chunks[c].size()) {
      throw TransportError(provider.name() + " returned " + std::to_string(results[c].size()) + " vectors for " +
                               std::to_string(chunks[c].size()) + " texts",
                           false);
    }
    for (auto& values : results[c]) {
      if (values.empty()) throw TransportError(provider.name() + " returned an empty vector", false);
      if (!out.empty() && values.size() != out.front().dim()) {
        throw TransportError("dimension mismatch within batch: " + std::to_string(values.size()) + " vs " +
                                 std::to_string(out.front().dim()),
                             false);
      }
      for (float v : values) {
        if (!std::isfinite(v)) throw TransportError(provider.name() + " returned a non-finite entry", false);
      }
      out.push_back({std::move(values), provider.name(), provider.model()});
    }
  }
  return out;
}

std::string encode_vector(std::span<const float> values) {
  std::string out;
  out.reserve(4 + 4 * values.size());
  const auto dim = static_cast<std::uint32_t>(values.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((dim >> (8 * i)) & 0xff));
  for (float f : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
  return out;
}

std::vector<float> decode_vector(std::string_view bytes) {
  auto u32_at = [&](std::size_t pos) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[pos + static_cast<std::size_t>(i)]);
    return v;
  };
  if (bytes.size() < 4) throw Error("vector payload too short");
  const auto dim = u32_at(0);
  if (bytes.size() != 4 + 4 * static_cast<std::size_t>(dim)) throw Error("vector payload size mismatch");
  std::vector<float> out(dim);
  for (std::uint32_t k = 0; k < dim; ++k) {
    const auto bits = u32_at(4 + 4 * static_cast<std::size_t>(k));
    std::memcpy(&out[k], &bits, 4);
  }
  return out;
}

std::optional<EmbeddingVector> EmbeddingCache::get(const EmbeddingCacheKey& key) {
  const auto found = store_.get(key.str());
  switch (found.status) {
    case RecordStore::Status::miss:
      ++stats_.misses;
      return std::nullopt;
    case RecordStore::Status::corrupt:
      ++stats_.corrupt;
      return std::nullopt;
    case RecordStore::Status::hit:
      break;
  }
  try {
    auto values = decode_vector(found.payload);
    ++stats_.hits;
    return EmbeddingVector{std::move(values), key.provider, key.model};
  } catch (const Error&) {
    ++stats_.corrupt;
    return std::nullopt;
  }
}

void EmbeddingCache::put(const EmbeddingCacheKey& key, const EmbeddingVector& vec) {
  store_.put(key.str(), encode_vector(vec.values));
}

EmbeddingVector cached_embed(EmbeddingProvider& provider, const std::string& text, EmbeddingCache& cache) {
  const auto key = EmbeddingCacheKey::of(provider.name(), provider.model(), text);
  if (auto hit = cache.get(key)) return *hit;
  auto fetched = embed_batch(provider, std::span(&text, 1));
  cache.put(key, fetched.front());
  return std::move(fetched.front());
}

std::vector<EmbeddingVector> cached_embed_all(EmbeddingProvider& provider, std::span<const std::string> texts,
                                              EmbeddingCache& cache) {
  std::vector<std::optional<EmbeddingVector>> slots(texts.size());
  std::vector<std::string> missing;
  std::unordered_map<std::string, std::size_t> missing_index;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (missing_index.count(texts[i])) continue;
    const auto key = EmbeddingCacheKey::of(provider.name(), provider.model(), texts[i]);
    if (auto hit = cache.get(key)) {
      slots[i] = std::move(hit);
    } else {
      missing_index.emplace(texts[i], missing.size());
      missing.push_back(texts[i]);
    }
  }
  std::vector<EmbeddingVector> fetched;
  if (!missing.empty()) {
    fetched = embed_batch(provider, missing);
    for (std::size_t k = 0; k < missing.size(); ++k) {
      cache.put(EmbeddingCacheKey::of(provider.name(), provider.model(), missing[k]), fetched[k]);
    }
  }
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (slots[i]) {
      out.push_back(std::move(*slots[i]));
    } else {
      out.push_back(fetched[missing_index.at(texts[i])]);
    }
  }
  return out;
}

}  // namespace xchan
