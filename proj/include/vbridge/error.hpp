#pragma once

#include <stdexcept>
#include <string>

namespace vbridge {

// Every failure surfaced by the library derives from Error. The CLI maps
// each subclass to its own exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Step index, count, or other argument outside its valid domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Command invoked with missing or empty required input.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace vbridge
