#pragma once

#include <stdexcept>
#include <string>

namespace tabraster {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed delimited input.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Schema file problems, or data that does not fit the schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Out-of-range parameters (layout, augmentation, splits, probe).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A module invariant was found violated at runtime.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace tabraster
