#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kggen {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A value violates a domain invariant (empty label, unknown cluster member, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed serialized input. offset is the byte position reported by the
// JSON parser, or npos for structural errors found after parsing.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Artifact written by an incompatible version of the tool.
class SchemaVersionError : public Error {
 public:
  using Error::Error;
};

// Missing or unreadable input file.
class InputError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// The model never produced a usable answer within the retry budget.
class ModelError : public Error {
 public:
  ModelError(const std::string& what, std::string raw_output, int attempts)
      : Error(what), raw_output_(std::move(raw_output)), attempts_(attempts) {}
  const std::string& raw_output() const { return raw_output_; }
  int attempts() const { return attempts_; }

 private:
  std::string raw_output_;
  int attempts_;
};

// Transport-level failure of a backend (HTTP error, connection refused).
class BackendError : public Error {
 public:
  using Error::Error;
};

class PipelineError : public Error {
 public:
  using Error::Error;
};

}  // namespace kggen
