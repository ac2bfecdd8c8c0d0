#pragma once

#include <stdexcept>
#include <string>

namespace rdr {

// Base for everything the harness throws on purpose.
class RdrError : public std::runtime_error {
 public:
  explicit RdrError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input bytes (PNG, JSON, ...). Message names the byte offset or
// chunk/line where parsing gave up.
class DecodeError : public RdrError {
 public:
  using RdrError::RdrError;
};

// Bad configuration or flag values. Aborts the run; never retried.
class ConfigError : public RdrError {
 public:
  using RdrError::RdrError;
};

// Input violates a schema invariant (manifest records, log records).
class ValidationError : public RdrError {
 public:
  using RdrError::RdrError;
};

// Network-level failure after retries are exhausted. The affected question
// is marked failed; the run continues.
class TransportError : public RdrError {
 public:
  using RdrError::RdrError;
};

// The remote answered, but not in the shape we can parse.
class ProtocolError : public RdrError {
 public:
  using RdrError::RdrError;
};

// Image too small for the requested kernel geometry.
class DegenerateInputError : public RdrError {
 public:
  using RdrError::RdrError;
};

// The scripted oracle was handed a question it has no measurement for.
class UnsupportedQuestionError : public RdrError {
 public:
  using RdrError::RdrError;
};

// Answer log violates the format contract. Message carries the line number.
class LogFormatError : public RdrError {
 public:
  using RdrError::RdrError;
};

}  // namespace rdr
