// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace splitsim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class FitError : public Error {
 public:
  using Error::Error;
};

/// Request exceeds what a machine can hold (e.g. token batch above the
/// out-of-memory batch size).
class CapacityError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Simulation could not complete (e.g. horizon exceeded).
class SimulationError : public Error {
 public:
  using Error::Error;
};

/// Broken internal invariant. Always a bug.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace splitsim
