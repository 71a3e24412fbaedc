#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <string>

namespace confrag {

/// Connection settings shared by the remote embedding provider and the remote
/// chat backend. `base_url` is scheme://host[:port]; request paths are absolute.
struct HttpSettings {
  std::string base_url;
  /// Name of the environment variable holding the bearer token. Empty means no auth.
  std::string api_key_env;
  std::chrono::milliseconds timeout{60'000};
  int max_retries = 3;
  std::chrono::milliseconds backoff{250};
};

/// JSON-over-HTTP POST with bearer auth and retry.
/// Transport failures, 429 and 5xx are retried with exponential backoff and
/// surface as TransportError once retries are exhausted. Other non-2xx
/// statuses and unparseable bodies raise ContractError.
class JsonHttpClient {
 public:
  /// Resolves the bearer token now so a missing credential fails before any
  /// network traffic. Throws InputError.
  explicit JsonHttpClient(HttpSettings settings);

  nlohmann::json post(const std::string& path, const nlohmann::json& body) const;

  const HttpSettings& settings() const noexcept { return settings_; }

 private:
  HttpSettings settings_;
  std::string token_;
};

}  // namespace confrag
