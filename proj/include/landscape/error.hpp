#pragma once

#include <stdexcept>
#include <string>

namespace landscape {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller-supplied parameter is outside its documented range.
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

// The request exceeds a size cap (dense oracle, gasket level, lattice volume).
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Input data violates an invariant (hopping range, vector length, mask).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A factorization met a non-positive pivot.
class DefinitenessError : public Error {
 public:
  using Error::Error;
};

// An iterative method did not reach its tolerance.
class IterationError : public Error {
 public:
  IterationError(const std::string& what, double residual)
      : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// Probabilistic normalization requested on a graph whose ambient degree varies.
class UnsupportedNormalization : public Error {
 public:
  using Error::Error;
};

}  // namespace landscape
