#pragma once

#include <stdexcept>
#include <string>

namespace memscope {

// Every module reports failures through this hierarchy. The CLI prints
// what() verbatim and maps the exception to an exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file contents (bad magic, bad version, unparsable record).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a data-model invariant.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A metric whose defining formula has a zero or negative denominator.
class UndefinedValueError : public Error {
 public:
  using Error::Error;
};

class RoutingError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace memscope
