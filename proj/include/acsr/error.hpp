#pragma once

#include <stdexcept>
#include <string>

namespace acsr {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text or bytes.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Missing or inconsistent configuration, detected before any work starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace acsr
