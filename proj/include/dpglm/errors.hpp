#pragma once

#include <stdexcept>
#include <string>

namespace dpglm {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension / shape mismatch between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid scalar parameter (out of the documented domain).
class ParamError : public Error {
 public:
  using Error::Error;
};

// Non-finite value produced where a finite one is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Inconsistent run configuration (e.g. DP noise without a sensitivity bound).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Iterates blew past the divergence guard; carries the offending step.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int step) : Error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

// Requested loss does not satisfy the operation's hypotheses.
class UnsupportedLossError : public Error {
 public:
  using Error::Error;
};

// RDP order outside the validity domain of the chosen bound.
class UnsupportedOrderError : public Error {
 public:
  using Error::Error;
};

// Finite differences would straddle a clipping activation boundary.
class BoundaryError : public Error {
 public:
  using Error::Error;
};

// Malformed input file; message carries the line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line) : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

}  // namespace dpglm
