#pragma once

#include <stdexcept>
#include <string>

namespace zshot {

// Error categories map onto CLI exit codes: config-like errors exit 2,
// contract violations exit 3, numerical aborts exit 4.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GeometryError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class FormatError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class LookupError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class LoadError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

}  // namespace zshot
