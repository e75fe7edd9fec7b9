#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace scalesgd {

/// Rejected configuration or argument (CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Bad or unreadable data (CLI exit code 3).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A trainer produced a non-finite iterate (CLI exit code 4).
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t last_finite_step, const std::string& what)
      : std::runtime_error(what), last_finite_step_(last_finite_step) {}

  std::size_t last_finite_step() const noexcept { return last_finite_step_; }

 private:
  std::size_t last_finite_step_;
};

/// A loss target was never met within the iteration budget (CLI exit code 5).
class TargetNotReached : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace scalesgd
