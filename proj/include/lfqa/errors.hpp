#pragma once

#include <stdexcept>
#include <string>

namespace lfqa {

/// Malformed or invariant-violating input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or arguments detected before any work starts.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Network-level failure talking to a remote endpoint. Retryable.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The remote endpoint answered, but the payload is unusable. Carries the raw
/// payload so callers can surface it.
class MalformedOutput : public std::runtime_error {
 public:
  MalformedOutput(const std::string& what, std::string payload)
      : std::runtime_error(what), payload_(std::move(payload)) {}
  const std::string& payload() const noexcept { return payload_; }

 private:
  std::string payload_;
};

}  // namespace lfqa
