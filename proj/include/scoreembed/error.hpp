#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace scoreembed {

// Bad input data: unreadable files, malformed records, inconsistent shapes.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tree-format parse failure; offset is the character position in the line.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : DataError(what + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Non-finite values during training or a failed gradient check.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration keys or values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace scoreembed
