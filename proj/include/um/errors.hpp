#pragma once

#include <stdexcept>
#include <string>

namespace um {

// Bad model/program/evidence data: malformed JSON payloads, invariant
// violations, out-of-range values. CLI maps this to exit code 3.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Numeric failure during optimisation or sampling (non-finite gradients,
// degenerate importance weights). CLI maps this to exit code 4.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace um
