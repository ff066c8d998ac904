#pragma once

#include <stdexcept>
#include <string>

namespace rcm {

// Base of every error raised by the library. The CLI maps subclasses onto
// exit codes: configuration-type errors -> 2, numerical backend -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid law, lattice or experiment parameter.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Argument outside the operation's domain (negative time, t beyond horizon).
class RangeError : public Error {
 public:
  using Error::Error;
};

// A stencil or box would wrap around the torus and read an edge twice.
class AliasingError : public Error {
 public:
  using Error::Error;
};

// Functional is missing a bound needed by the requested norm.
class DeclarationError : public Error {
 public:
  using Error::Error;
};

// Iterative solver did not reach its tolerance.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// Projected measure carries mass at eigenvalue zero where the formula needs 1/λ.
class NonergodicError : public Error {
 public:
  using Error::Error;
};

// Bad cluster wraps the torus; the infinite-lattice quantity is not representable.
class SaturationError : public Error {
 public:
  using Error::Error;
};

// Power-law fit preconditions violated.
class FitError : public Error {
 public:
  using Error::Error;
};

// Torus too large for a dense backend, or similar capacity limit.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Experiment configuration inconsistent with the experiment's preconditions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace rcm
