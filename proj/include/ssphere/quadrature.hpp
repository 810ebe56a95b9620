#pragma once

#include <Eigen/Dense>

#include <functional>

namespace ssphere {

struct QuadratureResult {
  Eigen::VectorXd value;
  Eigen::VectorXd error;
  int intervals = 0;
};

/// Globally adaptive Gauss-Kronrod (7/15) quadrature of a vector-valued
/// integrand over [a, b]. Bisects the worst interval until every component
/// satisfies err <= max(abs_tol, rel_tol |value|) or max_intervals is reached.
QuadratureResult integrate_gk15(const std::function<Eigen::VectorXd(double)>& f,
                                double a, double b, double rel_tol = 1e-14,
                                double abs_tol = 0.0, int max_intervals = 4000);

}  // namespace ssphere
