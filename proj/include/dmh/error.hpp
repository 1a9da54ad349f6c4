#pragma once

#include <stdexcept>
#include <string>

namespace dmh {

// Exit codes are a stable contract for scripts driving the CLI.
enum class ExitCode : int {
  kOk = 0,
  kValidation = 1,
  kIo = 2,
  kDivergence = 3,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual ExitCode exit_code() const noexcept { return ExitCode::kValidation; }
};

/// Malformed input document or a broken data invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kIo; }
};

/// An assignment that breaks the per-step legality rule (only Idle vehicles
/// may take a task) or refers to a task that is not waiting in the pool.
class ConstraintViolation : public Error {
 public:
  using Error::Error;
};

/// Events are exhausted while tasks remain unserved.
class DeadlockError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite parameter update during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kDivergence; }
};

}  // namespace dmh
