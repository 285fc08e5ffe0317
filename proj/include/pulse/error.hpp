#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pulse {

// Malformed input text. `line` is 1-based, 0 when not line-oriented.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Well-formed input that violates a domain invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure inside training (non-finite gradient and the like).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pulse
