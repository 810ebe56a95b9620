#include "ssphere/quadrature.hpp"

#include <array>
#include <cmath>
#include <queue>
#include <vector>

namespace ssphere {

namespace {

// Kronrod 15-point nodes (positive half) and weights, with the embedded
// Gauss 7-point weights on the odd-indexed nodes.
constexpr std::array<double, 8> kNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kKronrod = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kGauss = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b;
  Eigen::VectorXd value, error;
  double priority;
  bool operator<(const Segment& o) const { return priority < o.priority; }
};

Segment evaluate(const std::function<Eigen::VectorXd(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  Eigen::VectorXd fc = f(c);
  Eigen::VectorXd kron = kKronrod[7] * fc;
  Eigen::VectorXd gauss = kGauss[3] * fc;
  for (int i = 0; i < 7; ++i) {
    const double dx = h * kNodes[i];
    Eigen::VectorXd pair = f(c - dx) + f(c + dx);
    kron += kKronrod[i] * pair;
    if (i % 2 == 1) gauss += kGauss[i / 2] * pair;
  }
  Segment s{a, b, kron * h, ((kron - gauss) * h).cwiseAbs(), 0.0};
  s.priority = s.error.maxCoeff();
  return s;
}

}  // namespace

QuadratureResult integrate_gk15(const std::function<Eigen::VectorXd(double)>& f,
                                double a, double b, double rel_tol, double abs_tol,
                                int max_intervals) {
  std::priority_queue<Segment> heap;
  Segment first = evaluate(f, a, b);
  Eigen::VectorXd total = first.value;
  Eigen::VectorXd err = first.error;
  heap.push(std::move(first));

  auto converged = [&] {
    for (Eigen::Index k = 0; k < total.size(); ++k) {
      if (err[k] > std::max(abs_tol, rel_tol * std::abs(total[k]))) return false;
    }
    return true;
  };

  int intervals = 1;
  while (!converged() && intervals < max_intervals) {
    Segment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    Segment left = evaluate(f, worst.a, mid);
    Segment right = evaluate(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    heap.push(std::move(left));
    heap.push(std::move(right));
    ++intervals;
  }
  // Recompute the totals from the leaves to shed accumulated update roundoff.
  total.setZero();
  err.setZero();
  while (!heap.empty()) {
    total += heap.top().value;
    err += heap.top().error;
    heap.pop();
  }
  return {total, err, intervals};
}

}  // namespace ssphere
