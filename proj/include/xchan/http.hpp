#pragma once

#include <chrono>
#include <functional>
#include <string>

#include <nlohmann/json.hpp>

namespace xchan {

struct Endpoint {
  std::string base_url;  // e.g. "https://api.openai.com/v1" or "http://127.0.0.1:8080"
  std::string api_key;
  std::chrono::seconds timeout{60};
};

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
};

// POSTs `body` as JSON to base_url + path with a bearer token. Network
// failures, 429 and 5xx raise a retryable TransportError; other non-2xx
// statuses raise a non-retryable one.
nlohmann::json post_json(const Endpoint& endpoint, const std::string& path, const nlohmann::json& body);

// Runs `call`, retrying retryable TransportErrors with exponential backoff.
nlohmann::json with_retry(const RetryPolicy& policy, const std::function<nlohmann::json()>& call);

}  // namespace xchan
