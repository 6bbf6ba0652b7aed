#pragma once

#include <stdexcept>
#include <string>

namespace cellseg {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An input violates a documented precondition (shape, range, class ids).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FileNotFoundError : public IoError {
 public:
  explicit FileNotFoundError(const std::string& path)
      : IoError("file not found: " + path), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// A file exists but its content is not in a supported layout.
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace cellseg
