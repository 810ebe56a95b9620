#pragma once

// The family G_{r,s}: density proportional to exp(-r x^2 - s x) on (0, inf).

#include <array>
#include <cmath>
#include <cstdint>
#include <random>

#include "ssphere/error.hpp"
#include "ssphere/rng.hpp"

namespace ssphere {

struct TiltedParams {
  double r = 0.0;
  double s = 1.0;

  /// (r > 0) or (r == 0 and s > 0); the density is not integrable otherwise.
  bool admissible() const { return (r > 0.0 && std::isfinite(s)) || (r == 0.0 && s > 0.0); }
};

struct TiltedMoments {
  double z = 0.0;               // integral of exp(-r x^2 - s x) over (0, inf)
  std::array<double, 5> m{};    // raw moments, m[0] == 1, up to order 4

  double beta() const { return m[2]; }
  double theta() const { return m[2] / (m[1] * m[1]); }
  double variance() const { return m[2] - m[1] * m[1]; }
};

void require_admissible(const TiltedParams& p);

/// Closed-form route. For r > 0 the density is a normal with location
/// -s/(2r) and scale 1/sqrt(2r) truncated to the half line; the moments of
/// the overshoot above the truncation point follow a three-term recursion
/// seeded by the Mills ratio (continued fraction when the cut is in the tail).
TiltedMoments tilted_moments_closed_form(const TiltedParams& p);

/// Independent route: adaptive Gauss-Kronrod on (0, x_max), with x_max placed
/// where the integrand has dropped by more than e^-80 from its peak.
TiltedMoments tilted_moments_quadrature(const TiltedParams& p);

/// Both routes; throws internal_state if any quantity disagrees beyond
/// `rel_tol`. Returns the closed-form values.
TiltedMoments tilted_moments(const TiltedParams& p, double rel_tol = 1e-10);

/// Largest relative disagreement between the two routes over z and m[1..4].
double moment_route_discrepancy(const TiltedMoments& a, const TiltedMoments& b);

/// F(x) = int_0^x exp(-r t^2 - s t) dt / z. Uses the same completed-square
/// representation as the closed-form normalizer. F(x) = 0 for x <= 0.
double tilted_cdf(const TiltedParams& p, double x);

/// Exact draw. r = 0: inverse-CDF exponential. r > 0: truncated normal,
/// naive rejection when the cut is below the mode, otherwise the
/// shifted-exponential proposal with optimal rate.
double sample_tilted(const TiltedParams& p, Rng& rng);

/// Stateful sampler that caches the standardization of (r, s).
class TiltedSampler {
 public:
  explicit TiltedSampler(const TiltedParams& p);
  double operator()(Rng& rng);
  const TiltedParams& params() const { return params_; }

 private:
  TiltedParams params_;
  double scale_ = 0.0;   // 1/sqrt(2r), or 1/s when r == 0
  double cut_ = 0.0;     // standardized truncation point s / sqrt(2r)
  double rate_ = 0.0;    // exponential proposal rate for the tail branch
  std::normal_distribution<double> normal_;
};

struct SolverOptions {
  double tol = 1e-13;      // on the residual norm
  int max_iterations = 100;
  int max_halvings = 60;
};

struct SolveTrace {
  int iterations = 0;
  double residual = 0.0;
};

/// The admissible (r, s) with mean 1 and second moment b, for 1 < b <= 2.
/// Initialized by following theta along (r, 1) for b > pi/2 or along
/// (1/(1-u), -2u/(1-u)) for b <= pi/2, rescaled to unit mean, then polished
/// by damped Newton.
TiltedParams solve_params(double b, SolveTrace* trace = nullptr);

/// Damped Newton on (m1 - 1, m2 - b) from an arbitrary admissible start.
TiltedParams newton_moment_match(double b, TiltedParams start, const SolverOptions& opt = {},
                                 SolveTrace* trace = nullptr);

/// Parameters of alpha W when W ~ G_{r,s}.
inline TiltedParams scaled(const TiltedParams& p, double alpha) {
  return {p.r / (alpha * alpha), p.s / alpha};
}

}  // namespace ssphere
