#include "ssphere/special.hpp"

#include <cmath>
#include <numbers>

namespace ssphere {

namespace {

// Asymptotic expansion, x >= 26: erfcx(x) = 1/(x sqrt(pi)) sum (-1)^k (2k-1)!! / (2x^2)^k.
double erfcx_asymptotic(double x) {
  const double inv2x2 = 1.0 / (2.0 * x * x);
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 12; ++k) {
    term *= -(2.0 * k - 1.0) * inv2x2;
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum / (x * std::sqrt(std::numbers::pi));
}

}  // namespace

double erfcx(double x) {
  if (x < 0.0) {
    // erfc(x) = 2 - erfc(-x)
    if (x < -26.0) return INFINITY;
    return 2.0 * std::exp(x * x) - erfcx(-x);
  }
  if (x < 26.0) {
    // Split x^2 = hi + lo so the exponent carries no rounding error.
    const double hi = std::floor(x * 16.0) / 16.0;
    const double lo = (x - hi) * (x + hi);
    return std::exp(hi * hi) * std::exp(lo) * std::erfc(x);
  }
  return erfcx_asymptotic(x);
}

double mills_ratio(double a) {
  return std::sqrt(std::numbers::pi / 2.0) * erfcx(a / std::numbers::sqrt2);
}

}  // namespace ssphere
