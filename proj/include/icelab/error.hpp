#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace icelab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid scenario configuration (detected at load time, never per patient).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Syntax or structure error in a text input, with a 1-based location.
class ParseError : public Error {
public:
  ParseError(const std::string& msg, std::size_t line, std::size_t column)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + msg),
        line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

private:
  std::size_t line_;
  std::size_t column_;
};

class OracleError : public Error {
public:
  using Error::Error;
};

class PlanError : public Error {
public:
  using Error::Error;
};

class ImputationError : public Error {
public:
  using Error::Error;
};

class AnalysisError : public Error {
public:
  using Error::Error;
};

}  // namespace icelab
