#pragma once

#include <stdexcept>
#include <string>

namespace refine {

// Invalid argument to an operation (bad fraction, out-of-range rate, ...).
struct ArgumentError : std::invalid_argument {
  explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

// Failure while reading a dataset or checkpoint from disk.
struct IngestionError : std::runtime_error {
  explicit IngestionError(const std::string& what) : std::runtime_error(what) {}
};

// Inconsistent composition of modules (dims, K, architecture mismatch).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A required upstream artifact (checkpoint, CSV) is missing.
struct DependencyError : std::runtime_error {
  explicit DependencyError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace refine
