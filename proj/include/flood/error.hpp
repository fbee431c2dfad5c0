#pragma once

#include <stdexcept>
#include <string>

namespace flood {

/// Failure categories. The CLI maps each one to its own exit code.
enum class ErrorKind {
  validation = 1,  // bad parameters, geometry mismatch, contract violations
  numerical = 2,   // instability, non-convergence, mass-balance violations
  io = 3,          // missing files, malformed rasters, unwritable paths
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

}  // namespace flood
