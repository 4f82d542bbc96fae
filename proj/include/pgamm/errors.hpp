#pragma once

#include <stdexcept>
#include <string>

namespace pgamm {

// Base of every error the library throws. Callers that only need a
// diagnostic can catch this; the subclasses exist so tests and the CLI can
// tell contract violations apart from numerical trouble.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ContractError : public Error {
 public:
  using Error::Error;
};

class RoleError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, long row)
      : Error(what + " (row " + std::to_string(row) + ")"), row_(row) {}
  long row() const { return row_; }

 private:
  long row_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class DegenerateCovariateError : public Error {
 public:
  explicit DegenerateCovariateError(const std::string& column)
      : Error("degenerate covariate '" + column + "': zero variance"), column_(column) {}
  const std::string& column() const { return column_; }

 private:
  std::string column_;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class SupportError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class EstimationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, long subject, long coordinate)
      : Error(what + " (subject " + std::to_string(subject) + ", coordinate " +
              std::to_string(coordinate) + ")"),
        subject_(subject),
        coordinate_(coordinate) {}
  long subject() const { return subject_; }
  long coordinate() const { return coordinate_; }

 private:
  long subject_;
  long coordinate_;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

class TuningError : public Error {
 public:
  using Error::Error;
};

}  // namespace pgamm
