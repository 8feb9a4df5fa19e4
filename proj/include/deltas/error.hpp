#pragma once

#include <stdexcept>
#include <string>

namespace deltas {

enum class ErrorCode {
  invalid_camera,
  behind_camera,
  degenerate_baseline,
  empty_segment,
  out_of_bounds,
  dimension_mismatch,
  empty_map,
  underdetermined,
  point_at_infinity,
  near_degenerate_gradient,
  infeasible,
  invalid_depth,
  no_valid_pixels,
  resolution_mismatch,
  label_out_of_range,
  non_finite,
  invalid_config,
  io_error,
  parse_error,
};

/// Library-wide exception carrying a machine-checkable condition code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace deltas
