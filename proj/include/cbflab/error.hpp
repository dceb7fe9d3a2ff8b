#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cbflab {

enum class ErrorKind {
  invalid_dimension,
  invalid_resolution,
  shape_mismatch,
  invalid_exponent,
  negative_r,
  invalid_range,
  out_of_window,
  window_too_short,
  divergent_integral,
  nan_blowup,
  missing_ledger,
  mismatched_trajectories,
  empty_set,
  annulus_exceeds_box,
  invalid_config,
  unknown_key,
  type_error,
  inadmissible_params,
  ladder_not_decreasing,
  io_error,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries one of the kinds above so
/// callers (and the CLI exit-code mapping) can dispatch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_dimension: return "invalid-dimension";
    case ErrorKind::invalid_resolution: return "invalid-resolution";
    case ErrorKind::shape_mismatch: return "shape-mismatch";
    case ErrorKind::invalid_exponent: return "invalid-exponent";
    case ErrorKind::negative_r: return "negative-r";
    case ErrorKind::invalid_range: return "invalid-range";
    case ErrorKind::out_of_window: return "out-of-window";
    case ErrorKind::window_too_short: return "window-too-short";
    case ErrorKind::divergent_integral: return "divergent-integral";
    case ErrorKind::nan_blowup: return "nan-blowup";
    case ErrorKind::missing_ledger: return "missing-ledger";
    case ErrorKind::mismatched_trajectories: return "mismatched-trajectories";
    case ErrorKind::empty_set: return "empty-set";
    case ErrorKind::annulus_exceeds_box: return "annulus-exceeds-box";
    case ErrorKind::invalid_config: return "invalid-config";
    case ErrorKind::unknown_key: return "unknown-key";
    case ErrorKind::type_error: return "type-error";
    case ErrorKind::inadmissible_params: return "inadmissible-params";
    case ErrorKind::ladder_not_decreasing: return "ladder-not-decreasing";
    case ErrorKind::io_error: return "io-error";
  }
  return "unknown";
}

}  // namespace cbflab
