#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace shapediff {

// Bad arguments, malformed configuration, violated preconditions.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Failures while doing otherwise valid work (non-finite loss, I/O).
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Text-format parse failure. `line()` is 1-based; 0 means "whole input".
class ParseError : public ValidationError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class UnsupportedFormatError : public ParseError {
 public:
  using ParseError::ParseError;
};

}  // namespace shapediff
