#pragma once

#include <stdexcept>
#include <string>

namespace entail {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data violates a contract (bad file, unknown label, malformed test set).
class DataError : public Error {
 public:
  using Error::Error;
};

// Caller misuse: invalid arguments or option combinations.
class UsageError : public Error {
 public:
  using Error::Error;
};

// The scoring or embedding service could not be reached. Safe to retry.
class TransportError : public Error {
 public:
  using Error::Error;
  bool retriable() const noexcept { return true; }
};

// The service answered, but the answer is unusable.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class HttpStatusError : public ProtocolError {
 public:
  HttpStatusError(int status, const std::string& what)
      : ProtocolError(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class LengthMismatchError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

}  // namespace entail
