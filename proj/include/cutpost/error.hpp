#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cutpost {

enum class ErrorKind {
  argument,
  domain,
  degenerate_sample,
  convergence,
  unsupported_tag,
  shape,
  initialization,
  singular,
  conditioning,
  duplicate_design,
  mapping,
  bounds_violation,
  config,
  data_integrity,
  numerical,
};

const char* to_string(ErrorKind kind) noexcept;

/// Base exception for every recoverable failure raised by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Iterative solver gave up; carries the last iterate it reached.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> last_iterate)
      : Error(ErrorKind::convergence, what),
        last_iterate_(std::move(last_iterate)) {}

  const std::vector<double>& last_iterate() const noexcept {
    return last_iterate_;
  }

 private:
  std::vector<double> last_iterate_;
};

}  // namespace cutpost
