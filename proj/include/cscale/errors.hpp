#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cscale {

// Base class for every failure raised by the library. Catch this to isolate
// one analysis from another.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class PoleError : public Error {
public:
  using Error::Error;
};

class NegativeRadiusError : public Error {
public:
  using Error::Error;
};

class DegenerateJacobianError : public Error {
public:
  using Error::Error;
};

class InvalidSizeError : public Error {
public:
  using Error::Error;
};

class SupportViolationError : public Error {
public:
  using Error::Error;
};

class GridMismatchError : public Error {
public:
  using Error::Error;
};

class ComplexThetaError : public Error {
public:
  using Error::Error;
};

class DimensionMismatchError : public Error {
public:
  using Error::Error;
};

class SupportOverflowError : public Error {
public:
  using Error::Error;
};

class NonAnalyticVectorError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, std::size_t index)
      : Error(what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

private:
  std::size_t index_;
};

class SingularMatrixError : public Error {
public:
  SingularMatrixError(const std::string& what, std::size_t pivot)
      : Error(what), pivot_(pivot) {}
  std::size_t pivot() const noexcept { return pivot_; }

private:
  std::size_t pivot_;
};

// Raised when a resolvent is requested too close to the computed spectrum.
class NearSingularError : public Error {
public:
  NearSingularError(const std::string& what, double distance)
      : Error(what), distance_(distance) {}
  double distance() const noexcept { return distance_; }

private:
  double distance_;
};

}  // namespace cscale
