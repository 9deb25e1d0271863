#pragma once

#include <stdexcept>
#include <string>

namespace garment {

// Base for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file (OBJ, body container, checkpoint, config).
class ParseError : public Error {
 public:
  ParseError(const std::string& file, int line, const std::string& msg)
      : Error(file + ":" + std::to_string(line) + ": " + msg), line_number(line) {}
  explicit ParseError(const std::string& msg) : Error(msg), line_number(-1) {}
  int line_number;
};

// Mesh violates a structural precondition (non-manifold edge, degenerate face, bad index).
class TopologyError : public Error {
 public:
  using Error::Error;
};

// Linear solve / factorization failure, or a shape mismatch feeding one.
class SolveError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A non-finite value where finite numbers are required (loss terms,
// gradients, solver inputs, fit parameters).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace garment
