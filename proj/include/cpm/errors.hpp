#pragma once

#include <stdexcept>
#include <string>

namespace cpm {

/// Base class for all library errors.
struct error : std::runtime_error {
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid arguments, malformed files, shape mismatches.
struct validation_error : error {
  explicit validation_error(const std::string& msg) : error(msg) {}
};

/// Numerical failures: rank-deficient systems, factorization breakdowns.
struct numeric_error : error {
  explicit numeric_error(const std::string& msg) : error(msg) {}
};

}  // namespace cpm
