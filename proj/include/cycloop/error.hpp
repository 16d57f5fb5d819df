#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cycloop {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand dimensions do not agree with the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Input contains NaN or infinity, or an argument is outside its domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// On-disk payload is malformed or inconsistent with its header.
class FormatError : public Error {
 public:
  using Error::Error;
};

// A computation cannot proceed numerically (rank loss, blow-up).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// The saddle-point matrix is singular to working precision.
class SingularKktError : public NumericalError {
 public:
  SingularKktError(const std::string& what, std::size_t dimension, std::size_t rank,
                   double pivot_ratio)
      : NumericalError(what), dimension_(dimension), rank_(rank), pivot_ratio_(pivot_ratio) {}

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t rank() const noexcept { return rank_; }
  // smallest / largest absolute pivot of the factorization
  double pivot_ratio() const noexcept { return pivot_ratio_; }

 private:
  std::size_t dimension_;
  std::size_t rank_;
  double pivot_ratio_;
};

// A local control direction has no component in the reduced space.
class DegenerateProjection : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace cycloop
