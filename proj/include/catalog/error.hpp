#pragma once

#include <stdexcept>
#include <string>

namespace catalog {

// Base for every error raised by the pipeline. Each stage throws the most
// specific subclass so callers can tell retryable failures from bad input.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument, invalid config, malformed user decision.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Backend unreachable, non-200 reply, timeouts. Retryable.
class TransportError : public Error {
 public:
  using Error::Error;
};

// Backend answered but the payload does not have the expected shape.
class DecodeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Box has empty intersection with its page.
class DegenerateBoxError : public Error {
 public:
  using Error::Error;
};

}  // namespace catalog
