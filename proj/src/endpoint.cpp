#include "lfqa/endpoint.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace lfqa {

using nlohmann::json;

EndpointConfig EndpointConfig::from_env(std::string url) {
  EndpointConfig cfg;
  cfg.url = std::move(url);
  if (const char* key = std::getenv("MODEL_API_KEY")) cfg.api_key = key;
  return cfg;
}

HttpEndpoint::HttpEndpoint(EndpointConfig config) : config_(std::move(config)) {
  const auto scheme_end = config_.url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint URL lacks a scheme: " + config_.url);
  const auto path_start = config_.url.find('/', scheme_end + 3);
  origin_ = config_.url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : config_.url.substr(path_start);
}

json HttpEndpoint::call(const json& request, std::string_view request_id) {
  httplib::Client client(origin_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers{{"X-Request-Id", std::string(request_id)}};
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  auto res = client.Post(path_, headers, request.dump(), "application/json");
  if (!res) throw TransportError(config_.url + ": " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500) {
    throw TransportError(config_.url + ": HTTP " + std::to_string(res->status));
  }
  if (res->status < 200 || res->status >= 300) {
    throw MalformedOutput(config_.url + ": HTTP " + std::to_string(res->status), res->body);
  }
  try {
    return json::parse(res->body);
  } catch (const json::parse_error&) {
    throw MalformedOutput(config_.url + ": response is not JSON", res->body);
  }
}

RetryingEndpoint::RetryingEndpoint(std::shared_ptr<Endpoint> inner, RetryPolicy policy, Sleeper sleeper)
    : inner_(std::move(inner)), policy_(policy), sleep_(std::move(sleeper)) {
  if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (policy_.max_attempts < 1) policy_.max_attempts = 1;
}

json RetryingEndpoint::call(const json& request, std::string_view request_id) {
  auto backoff = policy_.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      return inner_->call(request, request_id);
    } catch (const TransportError& e) {
      if (attempt >= policy_.max_attempts) {
        throw TransportError(std::string(e.what()) + " (gave up after " + std::to_string(attempt) + " attempts)");
      }
      spdlog::warn("request {} attempt {} failed: {}", request_id, attempt, e.what());
      sleep_(backoff);
      backoff = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(backoff.count()) * policy_.multiplier));
    }
  }
}

std::shared_ptr<Endpoint> make_http_endpoint(const EndpointConfig& config) {
  return std::make_shared<RetryingEndpoint>(std::make_shared<HttpEndpoint>(config), config.retry);
}

std::string call_for_text(Endpoint& endpoint, const json& request, std::string_view field,
                          std::string_view request_id) {
  json response = endpoint.call(request, request_id);
  if (!response.is_object() || !response.contains(field) || !response[std::string(field)].is_string()) {
    throw MalformedOutput("response lacks string field '" + std::string(field) + "'", response.dump());
  }
  return response[std::string(field)].get<std::string>();
}

}  // namespace lfqa
