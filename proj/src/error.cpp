#include "ssphere/error.hpp"

namespace ssphere {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::spec_invalid: return "spec-invalid";
    case ErrorKind::inadmissible_params: return "inadmissible-params";
    case ErrorKind::out_of_range: return "out-of-range";
    case ErrorKind::conditioning: return "conditioning";
    case ErrorKind::nonconvergence: return "nonconvergence";
    case ErrorKind::infeasible_rejection: return "infeasible-rejection";
    case ErrorKind::internal_state: return "internal-state";
    case ErrorKind::empty_fiber: return "empty-fiber";
    case ErrorKind::degenerate_covariance: return "degenerate-covariance";
    case ErrorKind::inconclusive: return "inconclusive";
    case ErrorKind::parse_error: return "parse-error";
  }
  return "unknown";
}

}  // namespace ssphere
