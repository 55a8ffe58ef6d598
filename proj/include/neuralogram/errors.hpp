#pragma once

#include <stdexcept>
#include <string>

namespace nlg {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller passed an argument outside an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Requested frequency is at or above Nyquist.
class AliasingError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Normal equations cannot be solved without regularization.
class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Binary container errors (checkpoints, matrices, WAV files).
class FormatError : public Error {
 public:
  using Error::Error;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};

class IntegrityError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace nlg
