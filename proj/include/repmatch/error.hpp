#pragma once

#include <stdexcept>
#include <string>

namespace repmatch {

// Bad or inconsistent input: malformed files, shape mismatches, invalid
// arguments. The CLI maps these to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

// Arithmetic went wrong: no convergence, non-finite activations, degenerate
// subspaces. The CLI maps these to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace repmatch
