#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace primexec {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Text that does not match the skill grammar. `offset` is the byte where matching failed.
class GrammarError : public Error {
 public:
  GrammarError(std::size_t offset, const std::string& what)
      : Error("grammar error at byte " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class NoSlotError : public Error {
 public:
  using Error::Error;
};

class BehindCameraError : public Error {
 public:
  using Error::Error;
};

class OutOfFrameError : public Error {
 public:
  using Error::Error;
};

class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Document structure problem; `path` is a JSON-pointer-like field path.
class SchemaError : public Error {
 public:
  SchemaError(std::string path, const std::string& what)
      : Error("schema error at " + path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class InvariantError : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  DecodeError(std::size_t offset, const std::string& what)
      : Error("decode error at byte " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

class HistoryMismatchError : public Error {
 public:
  using Error::Error;
};

class UnknownTemplateError : public Error {
 public:
  using Error::Error;
};

class MissingFieldError : public Error {
 public:
  using Error::Error;
};

/// A motion-based decision reached execution without a destination.
class UnresolvedPosError : public Error {
 public:
  using Error::Error;
};

/// Planner response violates the protocol contract (unparseable decision, destination mismatch, error reply).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

}  // namespace primexec
