#pragma once

#include <stdexcept>
#include <string>

namespace bgadj {

/// Matrix is not symmetric positive definite (or numerically singular).
class SingularityError : public std::runtime_error {
 public:
  explicit SingularityError(const std::string& what) : std::runtime_error(what) {}
};

/// Degenerate model state: vanishing cluster, zero template row, or
/// parameters inside the degenerate set where the two-class theory
/// does not apply.
class DegenerateError : public std::runtime_error {
 public:
  explicit DegenerateError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input file (raster or parameter document).
class DataFormatError : public std::runtime_error {
 public:
  explicit DataFormatError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bgadj
