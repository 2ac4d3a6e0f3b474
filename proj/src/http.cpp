#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "xchan/http.hpp"

#include <thread>

#include <httplib.h>

#include "xchan/errors.hpp"

namespace xchan {

namespace {

struct SplitUrl {
  std::string scheme_host_port;
  std::string path_prefix;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InvalidInput("base URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  auto prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

}  // namespace

nlohmann::json post_json(const Endpoint& endpoint, const std::string& path, const nlohmann::json& body) {
  const auto url = split_url(endpoint.base_url);
  httplib::Client client(url.scheme_host_port);
  client.set_connection_timeout(endpoint.timeout);
  client.set_read_timeout(endpoint.timeout);
  client.set_write_timeout(endpoint.timeout);

  httplib::Headers headers;
  if (!endpoint.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint.api_key);

  auto res = client.Post(url.path_prefix + path, headers, body.dump(), "application/json");
  if (!res) {
    throw TransportError("POST " + endpoint.base_url + path + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status == 429 || res->status >= 500) {
    throw TransportError("POST " + path + " returned HTTP " + std::to_string(res->status));
  }
  if (res->status < 200 || res->status >= 300) {
    throw TransportError("POST " + path + " returned HTTP " + std::to_string(res->status) + ": " + res->body,
                         /*retryable=*/false);
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw TransportError(std::string("malformed JSON response: ") + e.what(), false);
  }
}

nlohmann::json with_retry(const RetryPolicy& policy, const std::function<nlohmann::json()>& call) {
  auto backoff = policy.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      return call();
    } catch (const TransportError& e) {
      if (!e.retryable() || attempt >= policy.max_attempts) throw;
    }
    std::this_thread::sleep_for(backoff);
    backoff = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(backoff.count()) * policy.multiplier));
  }
}

}  // namespace xchan
