#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace agreelearn {

// Base of every error the library throws. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed CSV content. Rows are 1-based data rows (the header is row 0).
class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::string column, const std::string& what)
      : Error("row " + std::to_string(row) + ", column " + column + ": " + what),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

// Header or column layout does not match what the caller asked for.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// An operation was called on inputs outside its documented domain.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Iterative solver ran out of budget.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::size_t iterations, double residual)
      : Error(what + " (iterations=" + std::to_string(iterations) +
              ", residual=" + std::to_string(residual) + ")"),
        iterations_(iterations),
        residual_(residual) {}

  std::size_t iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  std::size_t iterations_;
  double residual_;
};

class UnsupportedOperation : public Error {
 public:
  using Error::Error;
};

}  // namespace agreelearn
