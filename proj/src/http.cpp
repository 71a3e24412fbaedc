#include "confrag/http.hpp"

#include "confrag/errors.hpp"

#include <httplib.h>

#include <cstdlib>
#include <thread>

namespace confrag {

JsonHttpClient::JsonHttpClient(HttpSettings settings) : settings_(std::move(settings)) {
  if (settings_.base_url.empty()) {
    throw InputError("remote endpoint has no base URL");
  }
  if (!settings_.api_key_env.empty()) {
    const char* value = std::getenv(settings_.api_key_env.c_str());
    if (value == nullptr || *value == '\0') {
      throw InputError("credential environment variable '" + settings_.api_key_env +
                       "' is not set");
    }
    token_ = value;
  }
}

nlohmann::json JsonHttpClient::post(const std::string& path, const nlohmann::json& body) const {
  const auto payload = body.dump();
  std::string last_failure;
  auto delay = settings_.backoff;
  for (int attempt = 0; attempt <= settings_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    // httplib::Client is not safe to share across threads; one per request.
    httplib::Client client(settings_.base_url);
    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(settings_.timeout);
    const auto micros =
        std::chrono::duration_cast<std::chrono::microseconds>(settings_.timeout - seconds);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());
    client.set_write_timeout(seconds.count(), micros.count());
    if (!token_.empty()) {
      client.set_bearer_token_auth(token_);
    }

    auto result = client.Post(path, payload, "application/json");
    if (!result) {
      last_failure = "POST " + path + " failed: " + httplib::to_string(result.error());
      continue;
    }
    const int status = result->status;
    if (status == 429 || status >= 500) {
      last_failure = "POST " + path + " returned HTTP " + std::to_string(status);
      continue;
    }
    if (status < 200 || status >= 300) {
      throw ContractError("POST " + path + " returned HTTP " + std::to_string(status) + ": " +
                          result->body.substr(0, 512));
    }
    try {
      return nlohmann::json::parse(result->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw ContractError("POST " + path + " returned a non-JSON body: " + e.what());
    }
  }
  throw TransportError(last_failure + " (after " + std::to_string(settings_.max_retries) +
                       " retries)");
}

}  // namespace confrag
