#pragma once

#include <stdexcept>
#include <string>

namespace wast {

enum class ErrorKind {
  InvalidSparsity,
  Shape,
  State,
  Numeric,
  Config,
  Capacity,
  Divergence,
  Input,
  Parse,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidSparsity: return "invalid-sparsity";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::State: return "state";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Config: return "config";
    case ErrorKind::Capacity: return "capacity";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Input: return "input";
    case ErrorKind::Parse: return "parse";
  }
  return "unknown";
}

// Single exception type for the library; callers switch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace wast
