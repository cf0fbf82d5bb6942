#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace peertreat {

// Base of every error raised by the library. The C API maps each subclass
// onto a status code, and the CLI maps status codes onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed files, violated invariants, inconsistent dimensions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// An iterative procedure (fixed point, optimizer, outer loop) gave up.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Floating point degeneracy tied to one observation, e.g. a treatment CCP
// that rounds to exactly 0 or 1.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::optional<std::size_t> index = std::nullopt)
      : Error(index ? what + " (observation " + std::to_string(*index) + ")" : what),
        index_(index) {}

  std::optional<std::size_t> index() const { return index_; }

 private:
  std::optional<std::size_t> index_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace peertreat
