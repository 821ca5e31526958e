#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dropkit {

/// Error classes map onto process exit codes (sysexits) in the CLI.
enum class ErrorClass {
  usage = 64,
  data = 65,
  cant_create = 73,
  io = 74,
  transport = 69,
  config = 78,
};

class Error : public std::runtime_error {
public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), class_(cls) {}
  ErrorClass error_class() const noexcept { return class_; }

private:
  ErrorClass class_;
};

/// A malformed line in a course log or dataset file.
class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorClass::data, "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& what) : Error(ErrorClass::data, what) {}
};

/// A record or event names a student the log never declared.
class ReferentialError : public Error {
public:
  explicit ReferentialError(const std::string& what) : Error(ErrorClass::data, what) {}
};

/// Completion markers with a gap (chapter k marked without every j < k).
class NonSequentialCompletion : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class DegenerateInput : public Error {
public:
  explicit DegenerateInput(const std::string& what) : Error(ErrorClass::data, what) {}
};

class TransportError : public Error {
public:
  explicit TransportError(const std::string& what) : Error(ErrorClass::transport, what) {}
};

/// The model answered, but without a recognizable verdict / email shape.
class MalformedResponse : public Error {
public:
  explicit MalformedResponse(const std::string& what) : Error(ErrorClass::data, what) {}
};

class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& what) : Error(ErrorClass::config, what) {}
};

class DimensionMismatch : public Error {
public:
  explicit DimensionMismatch(const std::string& what) : Error(ErrorClass::data, what) {}
};

class StagesExhausted : public Error {
public:
  explicit StagesExhausted(const std::string& what) : Error(ErrorClass::transport, what) {}
};

}  // namespace dropkit
