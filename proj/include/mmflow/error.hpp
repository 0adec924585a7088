#pragma once

#include <stdexcept>
#include <string>

namespace mmflow {

// Bad input: malformed files, violated preconditions. CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A solver or integrator could not deliver its postcondition. CLI exit code 2.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mmflow
