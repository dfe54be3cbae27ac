#pragma once

#include <stdexcept>
#include <string>

namespace tailrisk {

// Invalid argument to a mathematical function (outside support, bad probability, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A statistical estimate could not be produced from the data at hand.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// No joint exceedance was observed, so a log-based or empirical estimator is undefined.
// Callers may lower the threshold or switch to an extrapolating estimator.
class NoJointExceedance : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : DataError(what + " (row " + std::to_string(row) + ", column " + std::to_string(column) + ")"),
        row_(row),
        column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace tailrisk
