#pragma once

#include <stdexcept>
#include <string>

namespace mcdrop {

/// Dimension mismatch between operands. The message names both shapes.
class ShapeError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A documented precondition of an operation was violated by the caller.
class ContractError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// Malformed delimited input. Carries the 1-based line (and column, 0 if n/a).
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string &msg, std::size_t line, std::size_t column = 0)
      : std::runtime_error(msg), line_(line), column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

private:
  std::size_t line_;
  std::size_t column_;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Training loss became NaN/Inf. Names the (1-based) epoch where it happened.
class TrainingDiverged : public std::runtime_error {
public:
  TrainingDiverged(const std::string &msg, std::size_t epoch)
      : std::runtime_error(msg), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

private:
  std::size_t epoch_;
};

} // namespace mcdrop
