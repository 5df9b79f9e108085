#pragma once

#include <stdexcept>
#include <string>

namespace boss {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Assembly / lowering failure. `line()` is 0 when no source line applies.
class AsmError : public Error {
 public:
  AsmError(int line, const std::string& msg)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace boss
