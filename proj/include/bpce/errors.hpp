#pragma once

#include <stdexcept>
#include <string>

namespace bpce {

// Error categories map one-to-one onto the CLI exit codes:
// ConfigError -> 1, BasisError -> 2, SamplerError -> 3, ShapeError -> 4.

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class BasisError : public std::runtime_error {
 public:
  explicit BasisError(const std::string& what) : std::runtime_error(what) {}
};

class SamplerError : public std::runtime_error {
 public:
  explicit SamplerError(const std::string& what) : std::runtime_error(what) {}
};

class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bpce
