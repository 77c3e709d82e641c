#pragma once

#include <stdexcept>
#include <string>

namespace pafnucy {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (mol2, CSV, manifests). Carries a 1-based line
// number when one is known.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, long line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

// File-level failures: unreadable paths, bad magic, truncation, version.
class IoError : public Error {
 public:
  using Error::Error;
};

// Inconsistent configuration: shape mismatches, charge-scaler mismatches.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Degenerate or out-of-domain inputs: empty ligand, constant charges,
// missing labels.
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace pafnucy
