#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace agbp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value or configuration violates a documented precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. The line number is 1-based; 0 means "whole file".
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A numerical routine failed (rank deficiency, non-convergence, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace agbp
