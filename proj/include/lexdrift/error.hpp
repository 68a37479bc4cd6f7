#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lexdrift {

/// Base for every error the library reports; the CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Arithmetic outside the domain of a rate or test (N = 0, zero marginal, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Duplicate session or duplicate response; the first write stands.
class ConflictError : public Error {
 public:
  using Error::Error;
};

/// Response submitted for a trial that is not the session's current one.
class SequencingError : public Error {
 public:
  using Error::Error;
};

}  // namespace lexdrift
