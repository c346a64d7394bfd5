#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace convcast {

/// Failure categories surfaced by the library. The CLI prints the category
/// name as the machine-readable part of its one-line diagnostics.
enum class ErrorKind {
  invalid_config,
  width_violation,
  state_violation,
  parse_error,
  unknown_platform,
  insufficient_data,
  rank_deficient,
  guard_violation,
  no_model,
  missing_model,
  malformed_request,
  search_too_large,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_config: return "invalid_config";
    case ErrorKind::width_violation: return "width_violation";
    case ErrorKind::state_violation: return "state_violation";
    case ErrorKind::parse_error: return "parse_error";
    case ErrorKind::unknown_platform: return "unknown_platform";
    case ErrorKind::insufficient_data: return "insufficient_data";
    case ErrorKind::rank_deficient: return "rank_deficient";
    case ErrorKind::guard_violation: return "guard_violation";
    case ErrorKind::no_model: return "no_model";
    case ErrorKind::missing_model: return "missing_model";
    case ErrorKind::malformed_request: return "malformed_request";
    case ErrorKind::search_too_large: return "search_too_large";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace convcast
