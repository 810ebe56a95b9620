#pragma once

#include <stdexcept>
#include <string>

namespace ssphere {

enum class ErrorKind {
  invalid_argument,
  spec_invalid,
  inadmissible_params,
  out_of_range,
  conditioning,
  nonconvergence,
  infeasible_rejection,
  internal_state,
  empty_fiber,
  degenerate_covariance,
  inconclusive,
  parse_error,
};

const char* to_string(ErrorKind kind) noexcept;

/// Library-wide exception. The kind is the stable part; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace ssphere
