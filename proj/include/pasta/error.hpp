#pragma once

#include <stdexcept>
#include <string>

namespace pasta {

/// Broad failure class; the CLI maps it onto an exit code.
enum class ErrorClass {
  Usage,    // bad arguments or configuration
  Data,     // malformed input files, shape mismatches against data
  Runtime,  // numerical failure, divergence
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, std::string kind, const std::string& what)
      : std::runtime_error(what), cls_(cls), kind_(std::move(kind)) {}

  ErrorClass error_class() const noexcept { return cls_; }
  /// Short machine-readable tag, e.g. "ragged-row" or "shape".
  const std::string& kind() const noexcept { return kind_; }

 private:
  ErrorClass cls_;
  std::string kind_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what)
      : Error(ErrorClass::Data, "shape", what) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorClass::Usage, "invalid-argument", what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(ErrorClass::Runtime, "non-finite", what) {}
};

class DataError : public Error {
 public:
  DataError(std::string kind, const std::string& what)
      : Error(ErrorClass::Data, std::move(kind), what) {}
};

class DivergenceError : public Error {
 public:
  DivergenceError(int epoch, const std::string& what)
      : Error(ErrorClass::Runtime, "divergence", what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace pasta
