#pragma once

#include <stdexcept>
#include <string>

namespace fedperi {

// Base of every error raised by the library. Subclasses exist so callers
// (mostly the CLI) can map failure classes onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ContractError : public Error {
 public:
  using Error::Error;
};

class OutOfVocabularyError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class ClientError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradient during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class InstabilityError : public Error {
 public:
  using Error::Error;
};

class StatTestError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class StageOrderError : public Error {
 public:
  using Error::Error;
};

class StaleCacheError : public StageOrderError {
 public:
  using StageOrderError::StageOrderError;
};

}  // namespace fedperi
