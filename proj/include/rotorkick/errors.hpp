#pragma once

#include <stdexcept>
#include <string>

namespace rotorkick {

// Invalid configuration or input files. Mapped to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure: basis leakage, step-control breakdown, norm drift.
// Mapped to CLI exit code 3.
class NumericsError : public std::runtime_error {
 public:
  explicit NumericsError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem/serialization failure. Mapped to CLI exit code 4.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rotorkick
