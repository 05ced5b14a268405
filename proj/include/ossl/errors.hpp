#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ossl {

/// Shape or extent mismatch. `axis()` names the offending axis, e.g. "input.C".
class DimensionError : public std::invalid_argument {
 public:
  DimensionError(std::string axis, const std::string& what)
      : std::invalid_argument(what + " [axis " + axis + "]"), axis_(std::move(axis)) {}
  const std::string& axis() const noexcept { return axis_; }

 private:
  std::string axis_;
};

/// Misuse of the gradient machinery (non-scalar loss, replayed tape, ...).
class AutogradError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed value passed to an operation (bad rotation index, non one-hot row, ...).
class ValueError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or truncated file. `offset()` is the byte position where parsing failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(std::string path, std::size_t offset, const std::string& what)
      : std::runtime_error(path + ": " + what + " (at byte offset " + std::to_string(offset) + ")"),
        path_(std::move(path)),
        offset_(offset) {}
  const std::string& path() const noexcept { return path_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::string path_;
  std::size_t offset_;
};

/// Filesystem failure, carries the path.
class IoError : public std::runtime_error {
 public:
  IoError(const std::string& path, const std::string& what) : std::runtime_error(path + ": " + what) {}
};

/// A loss or gradient became NaN/Inf during training.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(std::string tensor, const std::string& what)
      : std::runtime_error(what + " (first non-finite tensor: " + tensor + ")"), tensor_(std::move(tensor)) {}
  const std::string& tensor() const noexcept { return tensor_; }

 private:
  std::string tensor_;
};

}  // namespace ossl
