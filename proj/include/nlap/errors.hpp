#pragma once

#include <stdexcept>

namespace nlap {

/// Invalid configuration value or combination.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nlap
