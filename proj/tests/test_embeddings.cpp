#include <doctest.h>

#include <cmath>
#include <fstream>

#include "fake_server.hpp"
#include "test_support.hpp"
#include "xchan/digest.hpp"
#include "xchan/embeddings.hpp"
#include "xchan/errors.hpp"
#include "xchan/record_store.hpp"

using namespace xchan;
using xchan::testing::FakeServer;
using xchan::testing::TempDir;

namespace {

RemoteProviderConfig local_config(const FakeServer& server, std::size_t batch = 2) {
  RemoteProviderConfig c;
  c.name = "local";
  c.endpoint = {server.base_url(), "sk-test", std::chrono::seconds(5)};
  c.model = "text-embedding-ada-002";
  c.batch_size = batch;
  c.max_parallel = 2;
  c.retry = {3, std::chrono::milliseconds(1), 1.0};
  return c;
}

// Embedding of a text in the fake service: dims values derived from its length.
std::vector<float> fake_vector(const std::string& text, std::size_t dims) {
  std::vector<float> v(dims);
  for (std::size_t i = 0; i < dims; ++i) v[i] = static_cast<float>((text.size() + i) % 7) - 3.0f;
  return v;
}

}  // namespace

TEST_CASE("hash providers are deterministic") {
  HashEmbeddingProvider hash(32, 5);
  BagOfWordsHashProvider bow(32, 5);
  const std::vector<std::string> texts{"a red ball", "a red ball", "the dog"};
  for (EmbeddingProvider* p : {static_cast<EmbeddingProvider*>(&hash), static_cast<EmbeddingProvider*>(&bow)}) {
    const auto v = embed_batch(*p, texts);
    REQUIRE(v.size() == 3);
    CHECK(v[0].dim() == 32);
    CHECK(v[0].values == v[1].values);
    CHECK(v[0].values != v[2].values);
    double norm = 0.0;
    for (float x : v[0].values) norm += static_cast<double>(x) * x;
    CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-5));
  }
  CHECK(hash.calls() == 1);
  CHECK(HashEmbeddingProvider(32, 6).model() != hash.model());
}

TEST_CASE("bag-of-words vectors share lexical structure") {
  BagOfWordsHashProvider bow(64, 1);
  const std::vector<std::string> texts{"a man plays the guitar", "the man plays a guitar loudly", "zebra quartz"};
  const auto v = embed_batch(bow, texts);
  auto dot = [](const std::vector<float>& a, const std::vector<float>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
  };
  CHECK(dot(v[0].values, v[1].values) > dot(v[0].values, v[2].values));
}

TEST_CASE("empty text list is rejected") {
  HashEmbeddingProvider hash(8);
  CHECK_THROWS_AS(embed_batch(hash, std::vector<std::string>{}), InvalidInput);
}

TEST_CASE("vector encoding round trips") {
  const std::vector<float> v{1.5f, -0.25f, 3e-8f, 0.0f};
  CHECK(decode_vector(encode_vector(v)) == v);
  CHECK_THROWS_AS(decode_vector("ab"), Error);
}

TEST_CASE("cache miss then hit") {
  TempDir dir;
  HashEmbeddingProvider hash(8, 1);
  EmbeddingCache cache(dir.path() / "emb.bin");
  const auto first = cached_embed(hash, "some text", cache);
  CHECK(hash.calls() == 1);
  const auto second = cached_embed(hash, "some text", cache);
  CHECK(hash.calls() == 1);
  CHECK(first.values == second.values);
  CHECK(cache.stats().hits == 1);
  CHECK(cache.stats().misses == 1);

  // Reopening reads the persisted entry.
  EmbeddingCache reopened(dir.path() / "emb.bin");
  HashEmbeddingProvider fresh(8, 1);
  CHECK(cached_embed(fresh, "some text", reopened).values == first.values);
  CHECK(fresh.calls() == 0);
}

TEST_CASE("two providers keep distinct entries") {
  TempDir dir;
  HashEmbeddingProvider hash(8, 1);
  BagOfWordsHashProvider bow(8, 1);
  EmbeddingCache cache(dir.path() / "emb.bin");
  const auto a = cached_embed(hash, "same text", cache);
  const auto b = cached_embed(bow, "same text", cache);
  CHECK(a.values != b.values);
  CHECK(cache.store().size() == 2);
  CHECK(EmbeddingCacheKey::of("hash", "m", "t").str() != EmbeddingCacheKey::of("bow-hash", "m", "t").str());
  CHECK(EmbeddingCacheKey::of("hash", "m", "t").str() == EmbeddingCacheKey::of("hash", "m", "t").str());
}

TEST_CASE("corrupt entry is refetched and overwritten") {
  TempDir dir;
  const auto path = dir.path() / "emb.bin";
  HashEmbeddingProvider hash(8, 1);
  std::vector<float> original;
  {
    EmbeddingCache cache(path);
    original = cached_embed(hash, "text", cache).values;
  }
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(static_cast<std::streamoff>(std::filesystem::file_size(path)) - 40);
    f.put('\x7f');
  }
  EmbeddingCache cache(path);
  const auto again = cached_embed(hash, "text", cache);
  CHECK(again.values == original);
  CHECK(cache.stats().corrupt == 1);
  CHECK(hash.calls() == 2);
  const auto third = cached_embed(hash, "text", cache);
  CHECK(third.values == original);
  CHECK(hash.calls() == 2);
}

TEST_CASE("cached_embed_all deduplicates misses") {
  TempDir dir;
  HashEmbeddingProvider hash(8, 1);
  EmbeddingCache cache(dir.path() / "emb.bin");
  const std::vector<std::string> texts{"a", "b", "a", "c", "b"};
  const auto v = cached_embed_all(hash, texts, cache);
  REQUIRE(v.size() == 5);
  CHECK(v[0].values == v[2].values);
  CHECK(cache.store().size() == 3);
  cached_embed_all(hash, texts, cache);
  CHECK(hash.calls() == 1);
}

TEST_CASE("record store rebuilds a stale index") {
  TempDir dir;
  const auto path = dir.path() / "s.bin";
  {
    RecordStore s(path);
    s.put("k1", "v1");
    s.put("k2", "v2");
    s.put("k1", "v1b");
  }
  std::filesystem::remove(dir.path() / "s.bin.idx");
  RecordStore s(path);
  CHECK(s.size() == 2);
  CHECK(s.get("k1").payload == "v1b");
  CHECK(s.get("missing").status == RecordStore::Status::miss);
}

TEST_CASE("remote provider wire format") {
  std::string seen_auth;
  FakeServer server([&](const std::string& path, const std::string& auth, const nlohmann::json& body) {
    seen_auth = auth;
    if (path != "/v1/embeddings" || body.at("model") != "text-embedding-ada-002") return FakeServer::Reply{404, {}};
    nlohmann::json data = nlohmann::json::array();
    const auto& input = body.at("input");
    // Reverse order; the client must sort by index.
    for (std::size_t k = input.size(); k-- > 0;) {
      data.push_back({{"index", k}, {"embedding", fake_vector(input[k].get<std::string>(), 1536)}});
    }
    return FakeServer::Reply{200, {{"data", data}}};
  });
  RemoteEmbeddingProvider provider(local_config(server));
  const std::vector<std::string> texts{"one", "three", "fifteen", "x"};
  const auto v = embed_batch(provider, texts);
  REQUIRE(v.size() == 4);
  for (std::size_t i = 0; i < v.size(); ++i) {
    CHECK(v[i].dim() == 1536);
    CHECK(v[i].values == fake_vector(texts[i], 1536));
  }
  CHECK(seen_auth == "Bearer sk-test");
  CHECK(provider.calls() == 2);
}

TEST_CASE("remote provider retries server errors") {
  int calls = 0;
  FakeServer server([&](const std::string&, const std::string&, const nlohmann::json& body) {
    if (++calls < 3) return FakeServer::Reply{503, {{"error", "busy"}}};
    nlohmann::json data = nlohmann::json::array();
    for (std::size_t k = 0; k < body.at("input").size(); ++k) {
      data.push_back({{"index", k}, {"embedding", {1.0, 2.0}}});
    }
    return FakeServer::Reply{200, {{"data", data}}};
  });
  RemoteEmbeddingProvider provider(local_config(server, 8));
  CHECK(embed_batch(provider, std::vector<std::string>{"a"}).at(0).dim() == 2);
  CHECK(server.requests() == 3);
}

TEST_CASE("remote provider gives up") {
  FakeServer server([](const std::string&, const std::string&, const nlohmann::json&) {
    return FakeServer::Reply{401, {{"error", "bad key"}}};
  });
  RemoteEmbeddingProvider provider(local_config(server));
  try {
    embed_batch(provider, std::vector<std::string>{"a"});
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK_FALSE(e.retryable());
  }
  CHECK(server.requests() == 1);

  FakeServer wrong_dims([](const std::string&, const std::string&, const nlohmann::json& body) {
    nlohmann::json data = nlohmann::json::array();
    for (std::size_t k = 0; k < body.at("input").size(); ++k) {
      data.push_back({{"index", k}, {"embedding", std::vector<double>(k + 1, 1.0)}});
    }
    return FakeServer::Reply{200, {{"data", data}}};
  });
  RemoteEmbeddingProvider bad(local_config(wrong_dims));
  CHECK_THROWS_AS(embed_batch(bad, std::vector<std::string>{"a", "b"}), TransportError);
}

TEST_CASE("sha256 known digest") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}
