#pragma once

#include <stdexcept>
#include <string>

namespace radon_roi {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied argument violates an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// File or message content is malformed (undecodable image, bad index file).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace radon_roi
