#pragma once

#include <stdexcept>
#include <string>

namespace ctxsched {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that fails validation: config files, timelines, task descriptions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A name (stream, topic, module, task) that is not registered.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// Registering a name that already exists.
class RegistrationError : public Error {
 public:
  using Error::Error;
};

class TimestampError : public Error {
 public:
  using Error::Error;
};

class ExprError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class EvalError : public Error {
 public:
  using Error::Error;
};

/// Expression referenced a stream that has not produced a value yet.
class MissingValueError : public EvalError {
 public:
  explicit MissingValueError(const std::string& stream)
      : EvalError("stream '" + stream + "' has no value yet"), stream_(stream) {}
  const std::string& stream() const noexcept { return stream_; }

 private:
  std::string stream_;
};

class StaleEpochError : public Error {
 public:
  using Error::Error;
};

/// A cgroup file operation failed; carries the path and errno.
class CgroupError : public Error {
 public:
  CgroupError(const std::string& path, int code, const std::string& what);
  const std::string& path() const noexcept { return path_; }
  int code() const noexcept { return code_; }

 private:
  std::string path_;
  int code_;
};

/// The running kernel lacks a required scheduler feature.
class CapabilityError : public CgroupError {
 public:
  using CgroupError::CgroupError;
};

}  // namespace ctxsched
