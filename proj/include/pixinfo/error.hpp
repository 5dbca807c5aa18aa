#pragma once

#include <stdexcept>
#include <string>

namespace pixinfo {

enum class ErrorKind {
  invalid_range,
  border,
  shape,
  size,
  threshold,
  parameter,
  empty_support,
  correspondence,
  spec,
  config,
  data,
  numerical,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_range: return "invalid-range";
    case ErrorKind::border: return "border";
    case ErrorKind::shape: return "shape";
    case ErrorKind::size: return "size";
    case ErrorKind::threshold: return "threshold";
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::empty_support: return "empty-support";
    case ErrorKind::correspondence: return "correspondence";
    case ErrorKind::spec: return "spec";
    case ErrorKind::config: return "config";
    case ErrorKind::data: return "data";
    case ErrorKind::numerical: return "numerical";
  }
  return "unknown";
}

/// Every failure raised by the library carries a kind so callers (and the
/// CLI exit-code mapping) can dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace pixinfo
