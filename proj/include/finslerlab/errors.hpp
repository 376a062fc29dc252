#pragma once

#include <stdexcept>
#include <string>

namespace finsler {

enum class ErrorCode {
  invalid_argument,
  parse_error,
  expression_too_large,
  pole_proximity,
  degenerate_boundary_point,
  outside_collar,
  projection_failed,
  chart_invalid,
  cover_gap,
  path_exits_domain,
  no_feasible_initialization,
  endpoints_not_connectable,
  not_on_common_fiber,
  extrapolation_failed,
  premise_failed,
  io_error,
  internal,
};

// All library failures funnel through this one type so the C boundary can map
// them onto status codes without losing the human-readable message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::expression_too_large: return "expression_too_large";
    case ErrorCode::pole_proximity: return "pole_proximity";
    case ErrorCode::degenerate_boundary_point: return "degenerate_boundary_point";
    case ErrorCode::outside_collar: return "outside_collar";
    case ErrorCode::projection_failed: return "projection_failed";
    case ErrorCode::chart_invalid: return "chart_invalid";
    case ErrorCode::cover_gap: return "cover_gap";
    case ErrorCode::path_exits_domain: return "path_exits_domain";
    case ErrorCode::no_feasible_initialization: return "no_feasible_initialization";
    case ErrorCode::endpoints_not_connectable: return "endpoints_not_connectable";
    case ErrorCode::not_on_common_fiber: return "not_on_common_fiber";
    case ErrorCode::extrapolation_failed: return "extrapolation_failed";
    case ErrorCode::premise_failed: return "premise_failed";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::internal: return "internal";
  }
  return "unknown";
}

}  // namespace finsler
