#pragma once

#include <stdexcept>
#include <string>

namespace evoasym {

/// Precondition violation or malformed argument.
class InvalidInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Two values that must share a dimension do not.
class DimensionMismatchError : public InvalidInputError {
 public:
  using InvalidInputError::InvalidInputError;
};

/// A statistic was requested over too few samples.
class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A set-valued operator was evaluated where it has more than one element
/// (or none), e.g. an l1 subgradient at a zero coordinate.
class MultivaluedAtPointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative solve hit its iteration cap; carries the last residual.
class NoConvergenceError : public std::runtime_error {
 public:
  NoConvergenceError(const std::string& what, double last_residual)
      : std::runtime_error(what), last_residual_(last_residual) {}
  double last_residual() const { return last_residual_; }

 private:
  double last_residual_;
};

/// Scenario document could not be parsed; carries a 1-based position.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : std::runtime_error(what), line_(line), column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// A scenario entity reference does not resolve; carries the name.
class UnresolvedReferenceError : public std::runtime_error {
 public:
  UnresolvedReferenceError(const std::string& what, std::string name)
      : std::runtime_error(what), name_(std::move(name)) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

}  // namespace evoasym
