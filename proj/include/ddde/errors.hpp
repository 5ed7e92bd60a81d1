#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ddde {

/// Matrix or vector dimensions do not line up.
class ShapeError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// An operation was called out of order (e.g. backward before forward).
class StateError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// A scalar or count argument is outside its admissible range.
class ParameterError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A configuration document is malformed or inconsistent.
class ConfigError : public ParameterError {
public:
  using ParameterError::ParameterError;
};

/// A point or value lies outside the domain where the quantity is defined.
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Input data cannot be used (degenerate range, mass outside the support).
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Text input could not be parsed. Carries the 1-based line number.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// Binary input does not follow the expected layout.
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A file could not be opened, read, or written.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite objective.
class DivergenceError : public std::runtime_error {
public:
  DivergenceError(std::size_t epoch, std::size_t iteration)
      : std::runtime_error("training diverged: non-finite objective at epoch " +
                           std::to_string(epoch) + ", iteration " + std::to_string(iteration)),
        epoch_(epoch),
        iteration_(iteration) {}

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t iteration() const noexcept { return iteration_; }

private:
  std::size_t epoch_;
  std::size_t iteration_;
};

} // namespace ddde
