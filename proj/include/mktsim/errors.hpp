#pragma once

#include <stdexcept>
#include <string>

namespace mktsim {

// Bad scenario file / schema violation; the CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Structurally invalid inputs (dimension mismatch, out-of-range parameter).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Estimator asked for a contrast that does not exist (single-arm data).
class UndefinedContrastError : public std::runtime_error {
 public:
  explicit UndefinedContrastError(const std::string& what) : std::runtime_error(what) {}
};

// Enumeration request larger than the safety guard allows.
class EnumerationGuardError : public std::runtime_error {
 public:
  explicit EnumerationGuardError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mktsim
