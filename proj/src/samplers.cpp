#include "ssphere/samplers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace ssphere {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Fiber-plane basis, component m of e1 and e2.
const std::array<double, 3> kE1 = {1.0 / std::numbers::sqrt2, -1.0 / std::numbers::sqrt2, 0.0};
const std::array<double, 3> kE2 = {1.0 / std::sqrt(6.0), 1.0 / std::sqrt(6.0), -2.0 / std::sqrt(6.0)};
// Direction of coordinate m's vertex in the (e1, e2) angle: pi/6, 5pi/6, 3pi/2.
constexpr std::array<double, 3> kVertexAngle = {kPi / 6.0, 5.0 * kPi / 6.0, 1.5 * kPi};

void throw_infeasible(const char* sampler, long long proposals) {
  throw Error(ErrorKind::infeasible_rejection,
              std::string(sampler) + " rejection sampler: no accepts in " +
                  std::to_string(proposals) +
                  " proposals (acceptance below 1e-6); use the gibbs sampler instead");
}

PointMatrix to_matrix(const std::vector<double>& flat, int n) {
  const Eigen::Index rows = static_cast<Eigen::Index>(flat.size()) / n;
  PointMatrix m(rows, n);
  if (rows > 0) m = Eigen::Map<const PointMatrix>(flat.data(), rows, n);
  return m;
}

double sample_on_arcs(const std::vector<AngleInterval>& arcs, Rng& rng) {
  double total = 0.0;
  for (const auto& a : arcs) total += a.length();
  double u = rng.uniform() * total;
  for (const auto& a : arcs) {
    if (u < a.length()) return a.lo + u;
    u -= a.length();
  }
  return arcs.back().hi;
}

}  // namespace

const char* to_string(SamplerId id) {
  switch (id) {
    case SamplerId::exact: return "exact";
    case SamplerId::shell: return "shell";
    case SamplerId::gibbs: return "gibbs";
  }
  return "?";
}

SamplerId sampler_from_string(std::string_view name) {
  if (name == "exact") return SamplerId::exact;
  if (name == "shell") return SamplerId::shell;
  if (name == "gibbs") return SamplerId::gibbs;
  throw Error(ErrorKind::invalid_argument, "unknown sampler '" + std::string(name) + "'");
}

SampleBatch merge_batches(const std::vector<SampleBatch>& parts) {
  if (parts.empty()) throw Error(ErrorKind::invalid_argument, "nothing to merge");
  SampleBatch out = parts.front();
  long long rows = 0;
  for (const auto& p : parts) {
    if (p.spec.n != out.spec.n || p.spec.b != out.spec.b || p.sampler != out.sampler) {
      throw Error(ErrorKind::invalid_argument, "merging batches with different provenance");
    }
    rows += p.size();
  }
  out.points.resize(rows, out.spec.n);
  out.proposals = 0;
  out.accepts = 0;
  long long at = 0;
  for (const auto& p : parts) {
    if (p.size() > 0) out.points.middleRows(at, p.size()) = p.points;
    at += p.size();
    out.proposals += p.proposals;
    out.accepts += p.accepts;
  }
  return out;
}

long long first_invalid_point(const SampleBatch& batch, double tol) {
  const Membership want =
      batch.sampler == SamplerId::shell ? Membership::in_shell : Membership::on_K;
  for (Eigen::Index i = 0; i < batch.points.rows(); ++i) {
    if (membership(batch.points.row(i).transpose(), batch.spec, batch.shell, tol) != want) return i;
  }
  return -1;
}

SampleBatch sample_exact(const ManifoldSpec& spec, long long count, Rng& rng, long long probe) {
  SampleBatch batch;
  batch.spec = spec;
  batch.sampler = SamplerId::exact;
  const int n = spec.n;
  if (spec.b == 1.0) {
    batch.points = PointMatrix::Ones(count, n);
    batch.accepts = count;
    batch.proposals = count;
    return batch;
  }
  if (!(spec.b > 1.0 && spec.b < n)) {
    throw Error(ErrorKind::spec_invalid, "exact sampler needs 1 < b < n");
  }
  std::normal_distribution<double> normal;
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(count) * n);
  Eigen::VectorXd z(n);
  long long proposals = 0, accepts = 0;
  while (accepts < count) {
    for (int i = 0; i < n; ++i) z[i] = normal(rng);
    ++proposals;
    const auto st = stats(z);
    // m(psi(z)) > 0  <=>  min z > mu - sigma / b'
    if (st.min_coord > st.mu - st.sigma * spec.d) {
      const Eigen::VectorXd x = psi(z, spec);
      if (x.minCoeff() > 0.0) {
        flat.insert(flat.end(), x.data(), x.data() + n);
        ++accepts;
      }
    }
    if (accepts == 0 && proposals >= probe) throw_infeasible("exact", proposals);
  }
  batch.points = to_matrix(flat, n);
  batch.proposals = proposals;
  batch.accepts = accepts;
  return batch;
}

SampleBatch sample_shell(const ShellSpec& shell, const TiltedParams& p, long long count,
                         Rng& rng, long long probe) {
  const ShellSpec checked = ShellSpec::make(shell.n, shell.b, shell.eps);
  TiltedSampler draw(p);
  SampleBatch batch;
  batch.spec = checked.manifold();
  batch.sampler = SamplerId::shell;
  batch.shell = checked;
  const int n = checked.n;
  const double e = checked.eps;
  const double b = checked.b;
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(count) * n);
  Eigen::VectorXd y(n);
  long long proposals = 0, accepts = 0;
  while (accepts < count) {
    double sum = 0.0, sumsq = 0.0, lo = INFINITY;
    for (int i = 0; i < n; ++i) {
      const double v = draw(rng);
      y[i] = v;
      sum += v;
      sumsq += v * v;
      lo = std::min(lo, v);
    }
    ++proposals;
    const double dm = sum / n - 1.0;
    const double dm2 = sumsq / n - b;
    if (lo > 0.0 && e < dm && dm < 2.0 * e && e < dm2 && dm2 < b * e) {
      // Re-check with the shared predicate so stored points always verify.
      if (membership(y, batch.spec, batch.shell) == Membership::in_shell) {
        flat.insert(flat.end(), y.data(), y.data() + n);
        ++accepts;
      }
    }
    if (accepts == 0 && proposals >= probe) throw_infeasible("shell", proposals);
  }
  batch.points = to_matrix(flat, n);
  batch.proposals = proposals;
  batch.accepts = accepts;
  return batch;
}

ShellAcceptance shell_acceptance(int n, double b, double eps, const TiltedParams& p,
                                 long long proposals, Rng& rng) {
  ShellSpec::make(n, b, eps);
  ShellSpec::make(n, b, 2.0 * eps);
  TiltedSampler draw(p);
  ShellAcceptance out;
  out.proposals = proposals;
  auto inside = [b](double dm, double dm2, double e) {
    return e < dm && dm < 2.0 * e && e < dm2 && dm2 < b * e;
  };
  for (long long t = 0; t < proposals; ++t) {
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = draw(rng);
      sum += v;
      sumsq += v * v;
    }
    const double dm = sum / n - 1.0;
    const double dm2 = sumsq / n - b;
    if (inside(dm, dm2, eps)) ++out.accepts_eps;
    if (inside(dm, dm2, 2.0 * eps)) ++out.accepts_2eps;
  }
  return out;
}

std::vector<AngleInterval> arc_feasible_set_centered(double center, double radius) {
  if (!(center > 0.0)) throw Error(ErrorKind::invalid_argument, "fiber needs s3 > 0");
  // Coordinate m is c + rho sqrt(2/3) cos(theta - vertex_m); it is positive
  // except on an arc of half-width acos(tau) opposite the vertex.
  const double reach = radius * std::sqrt(2.0 / 3.0);
  if (reach <= center) return {{0.0, kTwoPi}};
  const double half_excluded = std::acos(center / reach);
  const double half_kept = kPi / 3.0 - half_excluded;
  if (!(half_kept > 0.0)) return {};
  std::vector<AngleInterval> out;
  for (double v : kVertexAngle) {
    const double lo = v - half_kept;
    const double hi = v + half_kept;
    if (lo < 0.0) {
      out.push_back({0.0, hi});
      out.push_back({lo + kTwoPi, kTwoPi});
    } else if (hi > kTwoPi) {
      out.push_back({lo, kTwoPi});
      out.push_back({0.0, hi - kTwoPi});
    } else {
      out.push_back({lo, hi});
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.lo < b.lo; });
  return out;
}

std::vector<AngleInterval> arc_feasible_set(double s3, double q3) {
  if (!(s3 > 0.0)) throw Error(ErrorKind::invalid_argument, "fiber needs s3 > 0");
  const double rho2 = q3 - s3 * s3 / 3.0;
  if (rho2 < -1e-12 * std::max(1.0, q3)) {
    throw Error(ErrorKind::empty_fiber, "no real triple has sum " + std::to_string(s3) +
                                            " and sum of squares " + std::to_string(q3));
  }
  return arc_feasible_set_centered(s3 / 3.0, std::sqrt(std::max(0.0, rho2)));
}

Eigen::VectorXd gibbs_initial_point(const ManifoldSpec& spec) {
  const int n = spec.n;
  const double t = 1.0 - std::sqrt((spec.b - 1.0) / (n - 1.0));
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, t);
  x[0] = 1.0 + std::sqrt((spec.b - 1.0) * (n - 1.0));
  return x;
}

GibbsChain::GibbsChain(const ManifoldSpec& spec, Eigen::VectorXd start)
    : spec_(spec), x_(std::move(start)) {
  if (spec.n < 3) throw Error(ErrorKind::spec_invalid, "gibbs sampler needs n >= 3");
  if (!(spec.b > 1.0 && spec.b < spec.n)) {
    throw Error(ErrorKind::spec_invalid, "gibbs sampler needs 1 < b < n");
  }
  if (membership(x_, spec_) != Membership::on_K) {
    throw Error(ErrorKind::invalid_argument, "gibbs start point is not on K");
  }
}

GibbsChain::GibbsChain(const ManifoldSpec& spec)
    : GibbsChain(spec, gibbs_initial_point(ManifoldSpec::make(spec.n, spec.b))) {}

double GibbsChain::move_triple(int i, int j, int k, Rng& rng) {
  const std::array<int, 3> idx = {i, j, k};
  const double c = (x_[i] + x_[j] + x_[k]) / 3.0;
  double rho2 = 0.0;
  for (int m : idx) rho2 += (x_[m] - c) * (x_[m] - c);
  const auto arcs = arc_feasible_set_centered(c, std::sqrt(rho2));
  if (arcs.empty()) {
    throw Error(ErrorKind::internal_state, "empty feasible arc at an interior point");
  }
  const double rho = std::sqrt(rho2);
  for (int attempt = 0; attempt < 64; ++attempt) {
    const double theta = sample_on_arcs(arcs, rng);
    const double ct = std::cos(theta), st = std::sin(theta);
    std::array<double, 3> y;
    for (int m = 0; m < 3; ++m) y[m] = c + rho * (ct * kE1[m] + st * kE2[m]);
    // Roundoff can put an arc endpoint a hair below zero; redraw.
    if (y[0] > 0.0 && y[1] > 0.0 && y[2] > 0.0) {
      for (int m = 0; m < 3; ++m) x_[idx[m]] = y[m];
      return theta;
    }
  }
  throw Error(ErrorKind::internal_state, "could not place a triple strictly inside the orthant");
}

void GibbsChain::step(Rng& rng) {
  const auto n = static_cast<std::uint64_t>(spec_.n);
  const int i = static_cast<int>(rng.below(n));
  int j = static_cast<int>(rng.below(n - 1));
  if (j >= i) ++j;
  int k = static_cast<int>(rng.below(n - 2));
  if (k >= std::min(i, j)) ++k;
  if (k >= std::max(i, j)) ++k;
  move_triple(i, j, k, rng);
}

void GibbsChain::sweep(Rng& rng) {
  for (int t = 0; t < spec_.n; ++t) step(rng);
  Eigen::VectorXd projected = psi(x_, spec_);
  if (projected.minCoeff() > 0.0) x_ = std::move(projected);
}

SampleBatch sample_gibbs(const ManifoldSpec& spec, long long count, int sweeps, int burn_in,
                         Rng& rng) {
  if (sweeps < 1) throw Error(ErrorKind::invalid_argument, "thinning must be >= 1 sweep");
  if (burn_in < 0) throw Error(ErrorKind::invalid_argument, "burn-in must be >= 0");
  GibbsChain chain(spec);
  for (int t = 0; t < burn_in; ++t) chain.sweep(rng);
  SampleBatch batch;
  batch.spec = spec;
  batch.sampler = SamplerId::gibbs;
  batch.gibbs_sweeps = sweeps;
  batch.points.resize(count, spec.n);
  for (long long p = 0; p < count; ++p) {
    for (int t = 0; t < sweeps; ++t) chain.sweep(rng);
    batch.points.row(p) = chain.state().transpose();
  }
  batch.proposals = count;
  batch.accepts = count;
  return batch;
}

}  // namespace ssphere
