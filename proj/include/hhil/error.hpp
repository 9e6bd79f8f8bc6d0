#pragma once

#include <stdexcept>
#include <string>

namespace hhil {

/// Base class for every error raised by the workbench.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration, parameter, or input record failed validation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A file or stream could not be parsed. Carries the 1-based line number
/// (0 when unknown) and the byte offset of the offending record.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t offset = 0)
      : Error(what), line_(line), offset_(offset) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t line_;
  std::size_t offset_;
};

}  // namespace hhil
