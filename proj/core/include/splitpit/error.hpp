#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace splitpit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not satisfy an op-kind's shape rule.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Caller-supplied value violates a precondition (bad config, empty input, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file; carries the 1-based line number.
class FormatError : public Error {
 public:
  FormatError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// A PIT mode was asked to enumerate more references than the permutation cap allows.
class CapExceeded : public Error {
 public:
  CapExceeded(std::size_t k, std::size_t cap)
      : Error("permutation cap exceeded: K=" + std::to_string(k) +
              " > cap=" + std::to_string(cap)),
        k_(k),
        cap_(cap) {}

  std::size_t k() const { return k_; }
  std::size_t cap() const { return cap_; }

 private:
  std::size_t k_;
  std::size_t cap_;
};

/// Reading or writing a file failed.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace splitpit
