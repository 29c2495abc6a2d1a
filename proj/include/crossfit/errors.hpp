#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace crossfit {

// Base of every error raised by the library. The CLI maps subclasses onto
// exit codes, so keep the hierarchy shallow.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Data problems: anything wrong with the table handed to the library.
class DataError : public Error {
 public:
  using Error::Error;
};

class EmptyData : public DataError {
 public:
  EmptyData() : DataError("data table has no rows") {}
};

class CellError : public DataError {
 public:
  CellError(const std::string& what, int i, int j, int k)
      : DataError(what + " at (i=" + std::to_string(i) + ", j=" + std::to_string(j) +
                  ", k=" + std::to_string(k) + ")"),
        i(i), j(j), k(k) {}
  int i, j, k;
};

class MissingCell : public CellError {
 public:
  MissingCell(int i, int j, int k) : CellError("missing observation", i, j, k) {}
};

class DuplicateCell : public CellError {
 public:
  DuplicateCell(int i, int j, int k) : CellError("duplicate observation", i, j, k) {}
};

class LevelViolation : public DataError {
 public:
  LevelViolation(std::string name, double deviation)
      : DataError("covariate '" + name + "' varies below its declared level (max deviation " +
                  std::to_string(deviation) + ")"),
        name(std::move(name)), deviation(deviation) {}
  std::string name;
  double deviation;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(const std::string& what, std::size_t expected, std::size_t got)
      : Error(what + ": expected size " + std::to_string(expected) + ", got " +
              std::to_string(got)) {}
};

class NonPositiveLambda : public Error {
 public:
  NonPositiveLambda(int index, double value)
      : Error("lambda_" + std::to_string(index) + " = " + std::to_string(value) +
              " is not positive"),
        index(index), value(value) {}
  int index;
  double value;
};

class TooLargeForDenseOracle : public Error {
 public:
  explicit TooLargeForDenseOracle(std::size_t n)
      : Error("dense oracle refused n = " + std::to_string(n) + " (limit 4096)") {}
};

class SingularDesign : public Error {
 public:
  explicit SingularDesign(double condition)
      : Error("normal equations are singular (condition number " + std::to_string(condition) +
              ")"),
        condition(condition) {}
  double condition;
};

// The model cannot separate sigma_gamma^2 from sigma_e^2 when m == 1.
class NotIdentifiable : public Error {
 public:
  using Error::Error;
};

class BoundaryInference : public Error {
 public:
  BoundaryInference()
      : Error("asymptotic covariance is undefined when a variance component is at the floor") {}
};

class InvalidMixture : public Error {
 public:
  explicit InvalidMixture(double variance)
      : Error("mixture law cannot reach variance " + std::to_string(variance)),
        variance(variance) {}
  double variance;
};

class NonFiniteEvaluation : public Error {
 public:
  NonFiniteEvaluation() : Error("function returned a non-finite value") {}
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace crossfit
