#pragma once

// Vector statistics, the normalizing maps phi/psi, and membership tests for
// K = {x > 0 : sum x = n, sum x^2 = n b} and its shell thickening.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "ssphere/error.hpp"

namespace ssphere {

template <typename Scalar>
using Point = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// The pair (n, b) with its derived constants.
struct ManifoldSpec {
  int n = 0;
  double b = 0.0;
  double b_prime = 0.0;  // sqrt(b - 1)
  double d = 0.0;        // 1 / b_prime, +inf when b == 1
  std::optional<double> q;  // sqrt(b - 2), only for b > 2

  /// Validates 2 <= n and 1 <= b < n.
  static ManifoldSpec make(int n, double b) {
    if (n < 2) {
      throw Error(ErrorKind::spec_invalid, "n must be >= 2, got " + std::to_string(n));
    }
    if (!(b >= 1.0) || !(b < n)) {
      throw Error(ErrorKind::spec_invalid,
                  "K is empty unless 1 <= b < n (got n=" + std::to_string(n) +
                      ", b=" + std::to_string(b) + ")");
    }
    ManifoldSpec spec;
    spec.n = n;
    spec.b = b;
    spec.b_prime = std::sqrt(b - 1.0);
    spec.d = 1.0 / spec.b_prime;
    if (b > 2.0) spec.q = std::sqrt(b - 2.0);
    return spec;
  }
};

/// (n, b, eps): the set eps < mu-1 < 2 eps, eps < mu2-b < b eps, x > 0.
struct ShellSpec {
  int n = 0;
  double b = 0.0;
  double eps = 0.0;

  static ShellSpec make(int n, double b, double eps) {
    ManifoldSpec::make(n, b);
    if (!(eps > 0.0) || !(eps < 0.5)) {
      throw Error(ErrorKind::spec_invalid, "shell eps must lie in (0, 1/2)");
    }
    return ShellSpec{n, b, eps};
  }

  ManifoldSpec manifold() const { return ManifoldSpec::make(n, b); }
};

template <typename Scalar>
struct VectorStats {
  Scalar mu;
  Scalar mu2;
  Scalar sigma;
  Scalar min_coord;
};

/// mu, mu2, sigma and the minimum coordinate. sigma uses the centered
/// second pass so it stays accurate when b is close to 1.
template <typename Derived>
VectorStats<typename Derived::Scalar> stats(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (x.size() == 0) {
    throw Error(ErrorKind::invalid_argument, "stats of an empty vector");
  }
  const Scalar n = static_cast<Scalar>(x.size());
  const Scalar mu = x.sum() / n;
  const Scalar mu2 = x.squaredNorm() / n;
  const Scalar centered = (x.array() - mu).square().sum() / n;
  using std::sqrt;
  return {mu, mu2, sqrt(std::max(Scalar(0), centered)), x.minCoeff()};
}

/// True when phi takes its zero branch.
template <typename Scalar>
bool is_constant_vector(const VectorStats<Scalar>& st) {
  using std::abs;
  return st.sigma < Scalar(1e-12) * (Scalar(1) + abs(st.mu));
}

/// (x - mu 1) / sigma, or the zero vector on the diagonal.
template <typename Derived>
Point<typename Derived::Scalar> phi(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Point<Scalar> v = x;  // evaluate lazy expressions once
  const auto st = stats(v);
  if (is_constant_vector(st)) return Point<Scalar>::Zero(v.size());
  return (v.array() - st.mu).matrix() / st.sigma;
}

/// b' phi(x) + 1. The identity on K; maps every off-diagonal x onto the
/// affine sphere mu = 1, mu2 = b.
template <typename Derived>
Point<typename Derived::Scalar> psi(const Eigen::MatrixBase<Derived>& x,
                                    const ManifoldSpec& spec) {
  using Scalar = typename Derived::Scalar;
  return (Scalar(spec.b_prime) * phi(x).array() + Scalar(1)).matrix();
}

enum class Membership { on_K, in_shell, outside };

inline const char* to_string(Membership m) {
  switch (m) {
    case Membership::on_K: return "on_K";
    case Membership::in_shell: return "in_shell";
    case Membership::outside: return "outside";
  }
  return "?";
}

/// Default tolerance on |mu - 1| and |mu2 - b|. Equivalent to 1e-9 n on the
/// two constraint sums.
inline constexpr double kMembershipTol = 1e-9;

template <typename Derived>
Membership membership(const Eigen::MatrixBase<Derived>& x, const ManifoldSpec& spec,
                      const std::optional<ShellSpec>& shell = std::nullopt,
                      double tol = kMembershipTol) {
  if (!(spec.b >= 1.0) || !(spec.b < spec.n)) {
    throw Error(ErrorKind::spec_invalid, "K is empty unless 1 <= b < n");
  }
  if (!(tol > 0.0)) throw Error(ErrorKind::invalid_argument, "membership tol must be > 0");
  if (x.size() != spec.n) {
    throw Error(ErrorKind::invalid_argument, "point dimension does not match n");
  }
  const auto st = stats(x);
  const double mu = static_cast<double>(st.mu);
  const double mu2 = static_cast<double>(st.mu2);
  if (!(st.min_coord > 0)) return Membership::outside;
  if (std::abs(mu - 1.0) <= tol && std::abs(mu2 - spec.b) <= tol) return Membership::on_K;
  if (shell) {
    const double e = shell->eps;
    const double dm = mu - 1.0;
    const double dm2 = mu2 - shell->b;
    if (e < dm && dm < 2.0 * e && e < dm2 && dm2 < shell->b * e) return Membership::in_shell;
  }
  return Membership::outside;
}

}  // namespace ssphere
