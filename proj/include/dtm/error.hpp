#pragma once

#include <stdexcept>
#include <string>

namespace dtm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input description (network file, scenario file, CLI value).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Pathfinding failure: unknown intersection or unreachable destination.
class RoutingError : public Error {
 public:
  using Error::Error;
};

/// A call that violates an operation's precondition at runtime.
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace dtm
