#pragma once

#include <stdexcept>
#include <string>

namespace fracpq {

/// Raised when inputs violate a documented precondition (bad domain, bad
/// exponents, malformed configuration). The CLI maps this to exit status 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a numerical procedure cannot produce an admissible result.
/// The CLI maps this to exit status 3.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fracpq
