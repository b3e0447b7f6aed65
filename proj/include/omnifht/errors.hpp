#pragma once

#include <stdexcept>
#include <string>

namespace omnifht {

// Error categories map to CLI exit codes: config=2, data=3, numerical=4.

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace omnifht
