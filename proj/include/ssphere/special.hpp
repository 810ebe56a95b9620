#pragma once

namespace ssphere {

/// Scaled complementary error function exp(x^2) erfc(x), accurate to a few
/// ulps times x^2 for moderate x and uniformly for large x.
double erfcx(double x);

/// Mills ratio of the standard normal, Q(a) / phi(a) = sqrt(pi/2) erfcx(a / sqrt 2).
double mills_ratio(double a);

}  // namespace ssphere
