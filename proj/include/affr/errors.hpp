#pragma once

#include <stdexcept>
#include <string>

namespace affr {

// Bad caller input: shapes, grids, ranges.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A computation reached a state where its result is undefined
// (e.g. zero reference error in RPE, nonpositive GCV denominator).
class InvalidState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Factorization or other numerical failure.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Oracle paths refuse inputs that would take too long.
class SizeLimitError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// File and format problems. Carries the offending line when known (1-based, 0 = n/a).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what, long line = 0)
      : std::runtime_error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}

  long line() const noexcept { return line_; }

 private:
  long line_;
};

}  // namespace affr
