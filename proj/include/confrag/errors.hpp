#pragma once

#include <stdexcept>
#include <string>

namespace confrag {

/// Base for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: malformed files, unknown ids, invalid config.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Network-level failure. Callers may retry.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// A provider or backend violated its wire or data contract. Not retryable.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// An embedding batch mixed vector dimensions: the provider is misconfigured.
class DimensionMismatchError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// A chat backend answered without per-token log-probabilities.
class LogprobsMissingError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// Error re-raised by the pipeline with the failing stage attached.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what, bool transient = false)
      : Error(stage + ": " + what), stage_(std::move(stage)), transient_(transient) {}

  const std::string& stage() const noexcept { return stage_; }
  /// True when the underlying failure was a TransportError.
  bool transient() const noexcept { return transient_; }

 private:
  std::string stage_;
  bool transient_ = false;
};

}  // namespace confrag
