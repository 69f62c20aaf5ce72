#pragma once

#include <stdexcept>
#include <string>

namespace mfgrid {

// Error taxonomy shared by all modules. The CLI maps these onto exit codes:
// config/input -> 2, solver/infeasible -> 3, io -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed arguments, configs, or file contents.
class InputError : public Error {
 public:
  using Error::Error;
};

// Structurally unusable model data (e.g. disconnected network).
class StructuralError : public Error {
 public:
  using Error::Error;
};

// A well-formed problem with no feasible solution.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// Numerical solver gave up (pivot limit, non-convergence).
class SolverError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mfgrid
