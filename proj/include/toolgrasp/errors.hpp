#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace toolgrasp {

// Argument outside an operation's mathematical domain (non-finite angle,
// degenerate rectangle, negative distance, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Tensor shapes that do not fit together.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed text or binary input. `line()` is 1-based; 0 means the error is
// addressed by byte offset (or not addressable at all).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what
                                : what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training diverged (non-finite loss).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Synthetic scene generator could not place the requested tools.
class PlacementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class WorkspaceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ReachabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SafetyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace toolgrasp
