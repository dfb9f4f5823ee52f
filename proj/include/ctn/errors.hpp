#pragma once

#include <stdexcept>
#include <string>

namespace ctn {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// The constraint system admits no feasible bitstring.
struct InfeasibleSystemError : Error {
  explicit InfeasibleSystemError(const std::string& msg) : Error(msg) {}
};

/// A configured resource bound (enumeration size, coordinate magnitude) was exceeded.
struct BoundExceededError : Error {
  explicit BoundExceededError(const std::string& msg) : Error(msg) {}
};

/// Malformed textual input (instance files, region syntax, CLI values).
struct ParseError : Error {
  explicit ParseError(const std::string& msg) : Error(msg) {}
};

}  // namespace ctn
