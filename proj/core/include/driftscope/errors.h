#pragma once

#include <stdexcept>
#include <string>

namespace driftscope {

// Malformed or inconsistent input data (event logs, checkpoints, tables).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training or evaluation produced a non-finite value.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A configuration field is out of range.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace driftscope
