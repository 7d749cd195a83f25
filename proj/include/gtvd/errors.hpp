#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gtvd {

// Base for every error raised by the library. The CLI maps the concrete
// subclasses onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. `line()` is 1-based, 0 when the error is not tied to a
// specific line (e.g. a vertex count mismatch detected at end of file).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Input that is well-formed but geometrically unusable (all points coincide,
// too few points, collinear triples where a plane is required).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class NoSupportPair : public DegenerateInput {
 public:
  explicit NoSupportPair(std::size_t node)
      : DegenerateInput("no non-collinear support pair for node " + std::to_string(node)),
        node_(node) {}
  std::size_t node() const noexcept { return node_; }

 private:
  std::size_t node_;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace gtvd
