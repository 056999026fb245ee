#pragma once

#include <stdexcept>
#include <string>

namespace shunit {

// Tensor shapes that violate an operation's contract.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Bad dataset contents: orphan files, out-of-range labels, unreadable images.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// NaN/Inf in a loss term or metric.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A metric has no valid input (e.g. no class usable in both sets).
struct MetricUndefinedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace shunit
