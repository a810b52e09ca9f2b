#pragma once

#include <stdexcept>
#include <string>

namespace bibliograph {

// Base of every error the library throws. The CLI maps the subclasses onto
// exit codes (config 2, input 3, everything else 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

// A caller broke a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace bibliograph
