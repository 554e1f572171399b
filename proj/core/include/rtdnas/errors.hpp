#pragma once

#include <stdexcept>
#include <string>

namespace rtdnas {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent configuration (bad skeleton, missing keys,
// mismatched tables).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Skeleton that cannot produce a legal supernet.
class InvalidSkeleton : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Exhaustive enumeration or top-k request larger than allowed.
class PathLimitExceeded : public Error {
 public:
  using Error::Error;
};

// Decoded architecture that violates the cell DAG (source index >= target).
class MalformedDecode : public Error {
 public:
  using Error::Error;
};

// Non-finite loss during search.
class SearchDiverged : public Error {
 public:
  SearchDiverged(int epoch, std::string term, const std::string& what)
      : Error(what), epoch_(epoch), term_(std::move(term)) {}
  int epoch() const { return epoch_; }
  const std::string& term() const { return term_; }

 private:
  int epoch_;
  std::string term_;
};

// Throughput/latency constraint pair that could not be met.
class InfeasibleConstraint : public Error {
 public:
  using Error::Error;
};

}  // namespace rtdnas
