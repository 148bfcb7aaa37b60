#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

#include <json.hpp>

#include "lfqa/errors.hpp"

namespace lfqa {

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  double multiplier = 2.0;
};

struct EndpointConfig {
  std::string url;
  std::string api_key;  // sent as a bearer token when non-empty
  std::chrono::milliseconds timeout{60000};
  RetryPolicy retry;

  /// Config for `url` with the bearer token taken from MODEL_API_KEY.
  static EndpointConfig from_env(std::string url);
};

/// A JSON-in, JSON-out remote model. `request_id` identifies the example the
/// call is made for; it travels out of band (X-Request-Id) so retries of the
/// same request can be matched in server logs.
class Endpoint {
 public:
  virtual ~Endpoint() = default;
  virtual nlohmann::json call(const nlohmann::json& request, std::string_view request_id) = 0;
};

/// POSTs the request body as JSON to a fixed URL.
class HttpEndpoint final : public Endpoint {
 public:
  explicit HttpEndpoint(EndpointConfig config);
  nlohmann::json call(const nlohmann::json& request, std::string_view request_id) override;

 private:
  EndpointConfig config_;
  std::string origin_;
  std::string path_;
};

/// In-process endpoint; stubs in tests, adapters elsewhere.
class FunctionEndpoint final : public Endpoint {
 public:
  using Fn = std::function<nlohmann::json(const nlohmann::json&, std::string_view)>;
  explicit FunctionEndpoint(Fn fn) : fn_(std::move(fn)) {}
  nlohmann::json call(const nlohmann::json& request, std::string_view request_id) override {
    return fn_(request, request_id);
  }

 private:
  Fn fn_;
};

/// Retries TransportError with exponential backoff. Other errors pass through
/// on the first occurrence.
class RetryingEndpoint final : public Endpoint {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;
  RetryingEndpoint(std::shared_ptr<Endpoint> inner, RetryPolicy policy, Sleeper sleeper = {});
  nlohmann::json call(const nlohmann::json& request, std::string_view request_id) override;

 private:
  std::shared_ptr<Endpoint> inner_;
  RetryPolicy policy_;
  Sleeper sleep_;
};

/// HTTP endpoint wrapped in the configured retry policy.
std::shared_ptr<Endpoint> make_http_endpoint(const EndpointConfig& config);

/// Calls the endpoint and returns response[field] as a string, or throws
/// MalformedOutput carrying the raw response.
std::string call_for_text(Endpoint& endpoint, const nlohmann::json& request, std::string_view field,
                          std::string_view request_id);

}  // namespace lfqa
