#pragma once

#include <stdexcept>
#include <string>

namespace qstate {

/// Root of all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unknown relation/attribute, missing declared column, malformed schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file; the message names the offending row and column.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Invalid or unsupported configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Vector/matrix dimensions that do not chain.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite input, parameter or gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Problem size exceeds what an exhaustive routine supports.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// An action or predicate cannot be expressed in the catalog's encoding.
class EncodingError : public Error {
 public:
  using Error::Error;
};

}  // namespace qstate
