#pragma once

#include <stdexcept>
#include <string>

namespace matchlab {

// Bad input: malformed geometry, inconsistent masses, invalid parameters.
// The CLI maps this to exit code 1.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A well-formed request the solver declines to run (size caps, violated
// hypotheses, delta too coarse for the domain). The CLI maps this to exit 2.
class SolverRefusal : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace matchlab
