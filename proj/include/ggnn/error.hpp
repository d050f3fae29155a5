#pragma once

#include <stdexcept>
#include <string>

namespace ggnn {

/// Base for every error raised by the library. The CLI maps the concrete
/// subclasses onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix or tensor dimensions disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameters or an input combination the operation rejects.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input. Carries the 1-based line number when known.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Index outside the declared node or feature range.
class BoundsError : public Error {
 public:
  using Error::Error;
};

/// Structural invariant violated (overlapping masks, unlabeled train node, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Operation called in the wrong order, e.g. backward before forward.
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace ggnn
