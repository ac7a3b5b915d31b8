#pragma once

#include <stdexcept>
#include <string>

namespace ppsim {

// Common base so the CLI boundary can catch the whole family at once.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& msg) : Error(msg) {}
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& msg) : Error(msg) {}
};

// Requested direction between two coincident points.
struct DegenerateDirection : Error {
  explicit DegenerateDirection(const std::string& msg) : Error(msg) {}
};

// Worker geometry has no usable span (all replicas coincident).
struct DegenerateGeometry : Error {
  explicit DegenerateGeometry(const std::string& msg) : Error(msg) {}
};

struct NumericalOverflow : Error {
  explicit NumericalOverflow(const std::string& msg) : Error(msg) {}
};

// Valley line search ran past its step budget without hitting the threshold.
struct BoundaryNotFound : Error {
  explicit BoundaryNotFound(const std::string& msg) : Error(msg) {}
};

struct InvalidSplit : Error {
  explicit InvalidSplit(const std::string& msg) : Error(msg) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace ppsim
