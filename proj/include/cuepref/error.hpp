#pragma once

#include <stdexcept>
#include <string>

namespace cuepref {

/// Malformed input: bad problem file, invalid record, unknown id.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The sampler could not produce trustworthy draws (divergences, R-hat).
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cuepref
