#pragma once

#include <stdexcept>
#include <string>

namespace prefdb {

// Base class for all engine errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when an operation would exceed a size guard (enumeration caps,
// state budgets, oracle item limits).  CLI maps this to exit code 2.
struct GuardError : Error {
  using Error::Error;
};

// Raised by text-format parsers; carries a 1-based source location.
struct ParseError : Error {
  ParseError(const std::string& msg, int line, int col)
      : Error(msg + " (line " + std::to_string(line) + ", column " +
              std::to_string(col) + ")"),
        line(line),
        col(col) {}
  int line = 0;
  int col = 0;
};

}  // namespace prefdb
