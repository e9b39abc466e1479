#pragma once

#include <stdexcept>
#include <string>

namespace routecast {

// Bad user input: malformed files, inconsistent configs, infeasible instances.
// The CLI maps it to exit code 2.
class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Filesystem failures and corrupt on-disk artifacts (exit code 3).
class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace routecast
