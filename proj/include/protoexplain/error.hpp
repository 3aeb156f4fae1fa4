#pragma once

#include <stdexcept>
#include <string>

namespace protoexplain {

enum class ErrorKind {
  Format,              // malformed on-disk data
  Unsupported,         // valid but unsupported encoding (Fortran order, dtype)
  Validation,          // shape/value invariants violated
  Io,                  // filesystem failures
  InsufficientPoints,  // fewer points than clusters
  Config,              // inconsistent run configuration
  MissingPrerequisite, // an upstream artifact has not been produced
  Integrity,           // train/test leakage
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace protoexplain
