#pragma once

#include <stdexcept>
#include <string>

namespace chordvae {

// Every failure the library reports derives from Error. The kind maps onto
// the CLI exit codes.
enum class ErrorKind {
  kUsage = 2,
  kValidation = 3,
  kIo = 4,
  kCheckpointMismatch = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::kUsage, what) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorKind::kValidation, what) {}
};

class ParseError : public ValidationError {
 public:
  explicit ParseError(const std::string& what) : ValidationError(what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

class CheckpointMismatch : public Error {
 public:
  explicit CheckpointMismatch(const std::string& what)
      : Error(ErrorKind::kCheckpointMismatch, what) {}
};

}  // namespace chordvae
