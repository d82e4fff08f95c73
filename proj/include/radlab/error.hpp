#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace radlab {

// Error categories map onto CLI exit codes: Input -> 2, Internal -> 1.
enum class ErrorClass { Input, Internal };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, std::string msg)
      : std::runtime_error(std::move(msg)), cls_(cls) {}
  ErrorClass error_class() const noexcept { return cls_; }

 private:
  ErrorClass cls_;
};

// Malformed file contents (bad JSON, no JSON object in a teacher reply, ...).
struct ParseError : Error {
  explicit ParseError(std::string msg) : Error(ErrorClass::Input, std::move(msg)) {}
};

// Well-formed input violating a contract (duplicate ids, bad fractions, ...).
struct ValidationError : Error {
  explicit ValidationError(std::string msg) : Error(ErrorClass::Input, std::move(msg)) {}
};

// Record does not match the documented file schema.
struct SchemaError : Error {
  explicit SchemaError(std::string msg) : Error(ErrorClass::Input, std::move(msg)) {}
};

// Bad runtime configuration (missing env var, unreachable endpoint config).
struct ConfigError : Error {
  explicit ConfigError(std::string msg) : Error(ErrorClass::Input, std::move(msg)) {}
};

// Filesystem trouble: missing file, unwritable path.
struct IoError : Error {
  explicit IoError(std::string msg) : Error(ErrorClass::Input, std::move(msg)) {}
};

// Argument outside the mathematical domain of an operation (T <= 0, alpha > 1).
struct DomainError : Error {
  explicit DomainError(std::string msg) : Error(ErrorClass::Input, std::move(msg)) {}
};

// Corrupt or incompatible checkpoint file.
struct CheckpointError : Error {
  explicit CheckpointError(std::string msg) : Error(ErrorClass::Input, std::move(msg)) {}
};

// Non-finite value produced inside a numeric kernel.
struct NumericError : Error {
  explicit NumericError(std::string msg) : Error(ErrorClass::Internal, std::move(msg)) {}
};

}  // namespace radlab
