#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace atesa {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input violates a documented invariant (bad labels, overlapping spans,
// missing JSON fields, unknown polarity strings).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed XML. Line and column are 1-based and refer to the source.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line, std::size_t column)
      : Error(message + " (line " + std::to_string(line) + ", column " +
              std::to_string(column) + ")"),
        line_(line),
        column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Training diverged (non-finite loss) or was given unusable data.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace atesa
