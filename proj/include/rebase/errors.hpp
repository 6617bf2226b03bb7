#pragma once

#include <stdexcept>
#include <string>

namespace rebase {

// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration: bad CLI flags, invalid model shape, inconsistent
// run options. CLI exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Dataset problems: missing file, malformed JSONL record, answer field
// without a parseable final answer. Messages name the offending line.
// CLI exit code 2.
class DatasetError : public Error {
 public:
  using Error::Error;
};

// Integer overflow in exact FLOPs arithmetic. Never silently wraps.
class OverflowError : public Error {
 public:
  using Error::Error;
};

// An operation was called with inputs outside its documented domain
// (empty reward list, zero total problems, nonpositive TFLOPs, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Base for remote-backend failures. CLI exit code 3.
class BackendError : public Error {
 public:
  using Error::Error;
};

// Connection failures, timeouts after retries, and non-2xx responses.
class BackendUnavailable : public BackendError {
 public:
  using BackendError::BackendError;
};

// The backend answered but broke the wire contract (malformed JSON,
// missing fields, reward outside [0,1]).
class ProtocolError : public BackendError {
 public:
  using BackendError::BackendError;
};

// Results file carries an unknown schema_version or is structurally broken.
class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace rebase
