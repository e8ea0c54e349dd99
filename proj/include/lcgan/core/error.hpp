#pragma once

#include <stdexcept>
#include <string>

namespace lcgan {

/// Base for every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied value violates a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Tensor shapes disagree with what an operation requires.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A file or byte stream does not follow its declared layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Filesystem access failed.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity appeared where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A manifest or config field is missing or invalid; field() names it.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error("field '" + field + "': " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace lcgan
