#pragma once

#include <stdexcept>
#include <string>

namespace bohm {

/// Failure categories shared by the C++ core and the C API.
enum class ErrorKind {
  invalid_input,    // malformed or out-of-contract arguments
  node,             // evaluation at (or too close to) a zero of the wave
  numerical,        // integration failure, undefined quantity
  under_resolved,   // truncation or grid not fine enough
  io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Thrown where a guidance law or polar decomposition divides by |psi|^2.
class NodeError : public Error {
 public:
  explicit NodeError(const std::string& what) : Error(ErrorKind::node, what) {}
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::invalid_input, what);
}

}  // namespace bohm
