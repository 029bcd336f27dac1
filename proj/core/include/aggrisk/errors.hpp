#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace aggrisk {

/// Base class of all errors thrown by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid numeric parameter (beta shape, confidence level, generator config).
class ParamError : public Error {
 public:
  using Error::Error;
};

/// Generator / execution configuration rejected before any work started.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Dataset loading or validation failure, carrying the offending location.
/// line == 0 means the error concerns the file as a whole.
class DataError : public Error {
 public:
  enum class Kind { MissingFile, MalformedRow, InvariantViolation };

  DataError(Kind kind, std::string file, long line, const std::string& message)
      : Error(render(file, line, message)), kind_(kind), file_(std::move(file)), line_(line) {}

  Kind kind() const { return kind_; }
  const std::string& file() const { return file_; }
  long line() const { return line_; }

 private:
  static std::string render(const std::string& file, long line, const std::string& message) {
    if (file.empty()) return message;
    if (line <= 0) return file + ": " + message;
    return file + ":" + std::to_string(line) + ": " + message;
  }

  Kind kind_;
  std::string file_;
  long line_;
};

/// An event referenced by the year event table has no catalogue entry, so a
/// grouping attribute cannot be resolved.
class AnnotationError : public Error {
 public:
  AnnotationError(std::string message, std::vector<std::uint32_t> missing_events)
      : Error(std::move(message)), missing_events_(std::move(missing_events)) {}

  const std::vector<std::uint32_t>& missing_events() const { return missing_events_; }

 private:
  std::vector<std::uint32_t> missing_events_;
};

}  // namespace aggrisk
