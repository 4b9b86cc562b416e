#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace epifed {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: invalid parameters, config values or preconditions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// An iterative solver failed to reach its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced by a numerical kernel.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace epifed
