#include "ssphere/tilted.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "ssphere/quadrature.hpp"
#include "ssphere/special.hpp"

namespace ssphere {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;

// Standardized cut above which the overshoot moments come from the
// continued fraction rather than the forward recursion.
constexpr double kTailCut = 2.0;

// Bisection steps along the homotopy curves; Newton finishes the job.
constexpr int kHomotopySteps = 30;

// Decay, in nats, past which the quadrature integrand is dropped.
constexpr double kQuadratureDecay = 80.0;

std::string describe(const TiltedParams& p) {
  std::ostringstream os;
  os.precision(17);
  os << "(r=" << p.r << ", s=" << p.s << ")";
  return os.str();
}

// Moments u_k = E[U^k], k = 0..4, of U = T - a where T ~ N(0,1) truncated to [a, inf).
std::array<double, 5> overshoot_moments(double a) {
  std::array<double, 5> u{};
  u[0] = 1.0;
  if (a > kTailCut) {
    // Ratios h_k = u_k / u_{k-1} satisfy h_k = k / (a + h_{k+1}); run the
    // recursion backward from deep enough that the tail is forgotten.
    const int depth = 64 + static_cast<int>(std::ceil((40.0 / a) * (40.0 / a)));
    double h = 0.0;
    std::array<double, 5> ratio{};
    for (int k = depth; k >= 1; --k) {
      h = k / (a + h);
      if (k <= 4) ratio[k] = h;
    }
    for (int k = 1; k <= 4; ++k) u[k] = u[k - 1] * ratio[k];
  } else {
    u[1] = 1.0 / mills_ratio(a) - a;
    for (int k = 1; k < 4; ++k) u[k + 1] = k * u[k - 1] - a * u[k];
  }
  return u;
}

}  // namespace

void require_admissible(const TiltedParams& p) {
  if (!p.admissible()) {
    throw Error(ErrorKind::inadmissible_params,
                "exp(-r x^2 - s x) is not integrable on (0, inf) for " + describe(p));
  }
}

TiltedMoments tilted_moments_closed_form(const TiltedParams& p) {
  require_admissible(p);
  TiltedMoments out;
  out.m[0] = 1.0;
  if (p.r == 0.0) {
    out.z = 1.0 / p.s;
    double factorial = 1.0;
    for (int k = 1; k <= 4; ++k) {
      factorial *= k;
      out.m[k] = factorial / std::pow(p.s, k);
    }
    return out;
  }
  const double scale = 1.0 / std::sqrt(2.0 * p.r);
  const double cut = p.s * scale;
  const auto u = overshoot_moments(cut);
  double power = 1.0;
  for (int k = 1; k <= 4; ++k) {
    power *= scale;
    out.m[k] = power * u[k];
  }
  out.z = scale * mills_ratio(cut);
  return out;
}

TiltedMoments tilted_moments_quadrature(const TiltedParams& p) {
  require_admissible(p);
  const double r = p.r;
  const double s = p.s;
  // Peak of the integrand on [0, inf) and the slope of the exponent there.
  const double peak = r > 0.0 ? std::max(0.0, -s / (2.0 * r)) : 0.0;
  const double shift = r * peak * peak + s * peak;
  const double slope = s + 2.0 * r * peak;
  const double reach = r > 0.0 ? 2.0 * kQuadratureDecay /
                                     (slope + std::sqrt(slope * slope + 4.0 * r * kQuadratureDecay))
                               : kQuadratureDecay / slope;

  auto integrand = [&](double x) {
    const double w = std::exp(-(r * x * x + s * x) + shift);
    Eigen::VectorXd v(5);
    double xk = 1.0;
    for (int k = 0; k <= 4; ++k) {
      v[k] = xk * w;
      xk *= x;
    }
    return v;
  };

  Eigen::VectorXd integral = Eigen::VectorXd::Zero(5);
  const double lower = std::max(0.0, peak - reach);
  if (peak > lower) integral += integrate_gk15(integrand, lower, peak, 1e-13).value;
  integral += integrate_gk15(integrand, peak, peak + reach, 1e-13).value;

  TiltedMoments out;
  out.z = std::exp(-shift) * integral[0];
  for (int k = 0; k <= 4; ++k) out.m[k] = integral[k] / integral[0];
  out.m[0] = 1.0;
  return out;
}

double moment_route_discrepancy(const TiltedMoments& a, const TiltedMoments& b) {
  auto rel = [](double x, double y) {
    return std::abs(x - y) / std::max(std::abs(x), std::abs(y));
  };
  double worst = rel(a.z, b.z);
  for (int k = 1; k <= 4; ++k) worst = std::max(worst, rel(a.m[k], b.m[k]));
  return worst;
}

TiltedMoments tilted_moments(const TiltedParams& p, double rel_tol) {
  const TiltedMoments closed = tilted_moments_closed_form(p);
  const TiltedMoments quad = tilted_moments_quadrature(p);
  const double gap = moment_route_discrepancy(closed, quad);
  if (!(gap <= rel_tol)) {
    throw Error(ErrorKind::internal_state,
                "closed-form and quadrature moments disagree by " + std::to_string(gap) +
                    " at " + describe(p));
  }
  return closed;
}

double tilted_cdf(const TiltedParams& p, double x) {
  require_admissible(p);
  if (!(x > 0.0)) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (p.r == 0.0) return -std::expm1(-p.s * x);
  const double scale = 1.0 / std::sqrt(2.0 * p.r);
  const double a = p.s * scale;
  const double u = x / scale;
  if (a >= -5.0) {
    // 1 - exp(-(a u + u^2/2)) erfcx((a+u)/sqrt2) / erfcx(a/sqrt2)
    const double tail = std::exp(-(a * u + 0.5 * u * u)) * erfcx((a + u) / kSqrt2) / erfcx(a / kSqrt2);
    return std::clamp(1.0 - tail, 0.0, 1.0);
  }
  const double lo = std::erfc(a / kSqrt2);
  return std::clamp((lo - std::erfc((a + u) / kSqrt2)) / lo, 0.0, 1.0);
}

TiltedSampler::TiltedSampler(const TiltedParams& p) : params_(p) {
  require_admissible(p);
  if (p.r == 0.0) {
    scale_ = 1.0 / p.s;
  } else {
    scale_ = 1.0 / std::sqrt(2.0 * p.r);
    cut_ = p.s * scale_;
    rate_ = 0.5 * (cut_ + std::sqrt(cut_ * cut_ + 4.0));
  }
}

double TiltedSampler::operator()(Rng& rng) {
  if (params_.r == 0.0) return -std::log(rng.uniform_open()) * scale_;
  if (cut_ <= 0.0) {
    for (;;) {
      const double t = normal_(rng);
      if (t >= cut_) return scale_ * (t - cut_);
    }
  }
  for (;;) {
    const double e = -std::log(rng.uniform_open()) / rate_;
    const double gap = cut_ + e - rate_;
    if (rng.uniform() <= std::exp(-0.5 * gap * gap)) return scale_ * e;
  }
}

double sample_tilted(const TiltedParams& p, Rng& rng) {
  TiltedSampler sampler(p);
  return sampler(rng);
}

TiltedParams newton_moment_match(double b, TiltedParams start, const SolverOptions& opt,
                                 SolveTrace* trace) {
  require_admissible(start);
  auto residual = [b](const TiltedMoments& m) {
    return Eigen::Vector2d(m.m[1] - 1.0, m.m[2] - b);
  };
  // Unit mean first; scaling stays in the family and keeps theta.
  TiltedParams p = scaled(start, 1.0 / tilted_moments_closed_form(start).m[1]);
  TiltedMoments mom = tilted_moments_closed_form(p);
  Eigen::Vector2d f = residual(mom);
  int it = 0;
  for (; it < opt.max_iterations && f.norm() > opt.tol; ++it) {
    const auto& m = mom.m;
    Eigen::Matrix2d jac;
    jac << -(m[3] - m[1] * m[2]), -(m[2] - m[1] * m[1]),
           -(m[4] - m[2] * m[2]), -(m[3] - m[2] * m[1]);
    const Eigen::Vector2d step = -jac.fullPivLu().solve(f);
    double lambda = 1.0;
    bool improved = false;
    for (int h = 0; h <= opt.max_halvings; ++h, lambda *= 0.5) {
      TiltedParams cand{p.r + lambda * step[0], p.s + lambda * step[1]};
      if (cand.r < 0.0) cand.r = 0.0;
      if (!cand.admissible()) continue;
      const TiltedMoments cm = tilted_moments_closed_form(cand);
      const Eigen::Vector2d cf = residual(cm);
      if (std::isfinite(cf.norm()) && cf.norm() < f.norm()) {
        p = cand;
        mom = cm;
        f = cf;
        improved = true;
        break;
      }
    }
    if (!improved) {
      // Stalled at the roundoff floor counts as converged.
      if (f.norm() <= 1e-11) break;
      throw Error(ErrorKind::nonconvergence,
                  "damped Newton stalled at residual " + std::to_string(f.norm()) +
                      " from start " + describe(start));
    }
  }
  if (!(f.norm() <= std::max(opt.tol, 1e-11))) {
    throw Error(ErrorKind::nonconvergence,
                "damped Newton did not converge, residual " + std::to_string(f.norm()));
  }
  if (trace) {
    trace->iterations = it;
    trace->residual = f.norm();
  }
  return p;
}

TiltedParams solve_params(double b, SolveTrace* trace) {
  if (!(b > 1.0) || !(b <= 2.0)) {
    throw Error(ErrorKind::out_of_range,
                "moment matching needs 1 < b <= 2 (got b=" + std::to_string(b) +
                    "); for b > 2 the marginal limit is Exp(1)");
  }
  if (b < 1.0 + 1e-4) {
    throw Error(ErrorKind::conditioning,
                "b within 1e-4 of 1 makes the moment-matching system ill-conditioned");
  }
  auto theta = [](const TiltedParams& p) { return tilted_moments_closed_form(p).theta(); };

  TiltedParams start{0.0, 1.0};
  const double theta_half_normal = std::numbers::pi / 2.0;
  if (b < 2.0 && b > theta_half_normal) {
    // theta(r, 1) falls from 2 at r = 0 toward pi/2 as r grows; bisect in v = r / (1 + r).
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < kHomotopySteps; ++i) {
      const double v = 0.5 * (lo + hi);
      (theta({v / (1.0 - v), 1.0}) > b ? lo : hi) = v;
    }
    const double v = 0.5 * (lo + hi);
    start = {v / (1.0 - v), 1.0};
  } else if (b <= theta_half_normal) {
    // V_u ~ G(1/(1-u), -2u/(1-u)) runs from the half normal (u = 0) to a point mass at 1.
    auto curve = [](double u) { return TiltedParams{1.0 / (1.0 - u), -2.0 * u / (1.0 - u)}; };
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < kHomotopySteps; ++i) {
      const double u = 0.5 * (lo + hi);
      (theta(curve(u)) > b ? lo : hi) = u;
    }
    start = curve(0.5 * (lo + hi));
  }
  const double mean = tilted_moments_closed_form(start).m[1];
  start = scaled(start, 1.0 / mean);
  return newton_moment_match(b, start, SolverOptions{}, trace);
}

}  // namespace ssphere
