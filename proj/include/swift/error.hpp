#pragma once

#include <stdexcept>
#include <string>

namespace swift {

/// Broad failure classes; the CLI maps each to its own exit code.
enum class ErrorKind {
  InvalidArgument,  // bad shapes, modes, parameters
  Format,           // malformed input files
  Numerical,        // NaN/Inf, divergence
  Io,               // filesystem
};

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

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(ErrorKind::InvalidArgument, what);
}

}  // namespace swift
