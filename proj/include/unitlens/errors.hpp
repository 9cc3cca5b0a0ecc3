// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace unitlens {

// Error categories double as CLI exit codes.
enum class ErrorCategory : int {
  config = 2,
  io = 3,
  contract = 4,
  numeric = 5,
};

inline const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::io: return "io";
    case ErrorCategory::contract: return "contract";
    case ErrorCategory::numeric: return "numeric";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

/// Bad magic bytes or unsupported version in a binary file.
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

/// File ends before a declared payload does.
class TruncationError : public IoError {
 public:
  using IoError::IoError;
};

/// Declared dimensions cannot describe a real tensor (product overflows or exceeds the file).
class DimensionOverflowError : public IoError {
 public:
  using IoError::IoError;
};

class ChecksumError : public IoError {
 public:
  using IoError::IoError;
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(ErrorCategory::contract, what) {}
};

/// Operand shapes do not fit the operation.
class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

class RangeError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// Correlation requested over a constant sequence.
class UndefinedCorrelation : public ContractError {
 public:
  using ContractError::ContractError;
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorCategory::numeric, what) {}
};

}  // namespace unitlens
