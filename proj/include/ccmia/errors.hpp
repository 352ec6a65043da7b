#pragma once

#include <stdexcept>
#include <string>

namespace ccmia {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file; carries the file name and 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::string file, long line, const std::string& msg)
      : Error(file + ":" + std::to_string(line) + ": " + msg),
        file_(std::move(file)),
        line_(line) {}

  const std::string& file() const { return file_; }
  long line() const { return line_; }

 private:
  std::string file_;
  long line_;
};

// Invalid configuration or argument combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ccmia
