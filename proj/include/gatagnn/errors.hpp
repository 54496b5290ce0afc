#pragma once

#include <stdexcept>
#include <string>

namespace gatagnn {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf produced by a forward op, or a diverging optimizer.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A relation module needs at least two companies.
class DegenerateGraphError : public Error {
 public:
  using Error::Error;
};

class ContractError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace gatagnn
