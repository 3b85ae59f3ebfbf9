#pragma once

#include <stdexcept>
#include <string>

namespace smp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user-facing input: experiment configs, CLI arguments, file formats.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Structured-text input that failed to parse; message carries line/field.
class ParseError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Invalid model objects: non-stochastic rows, negative probabilities,
// alphabets that do not line up, unsupported densities.
class ModelError : public Error {
 public:
  using Error::Error;
};

// A policy or instance violated the physical constraints.
class FeasibilityError : public Error {
 public:
  FeasibilityError(const std::string& what, int slot)
      : Error(what), slot_(slot) {}
  int slot() const { return slot_; }

 private:
  int slot_;
};

}  // namespace smp
