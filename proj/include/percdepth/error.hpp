#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace percdepth {

// Tensor shapes do not fit the operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A scalar parameter is outside its documented domain.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Inconsistent or unknown configuration (network scale, JSON keys, presets).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed file content. `offset` is the byte position where parsing failed.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, std::size_t offset, const std::string& what)
      : std::runtime_error(file + ": offset " + std::to_string(offset) + ": " + what),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// NaN or Inf appeared in a loss, gradient or metric.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace percdepth
