#pragma once

// Samplers for the uniform law on K: exact rejection through psi, the
// conditioned product law on the shell K^eps, and a Gibbs chain that
// resamples three coordinates at a time on their constraint circle.

#include <Eigen/Dense>

#include <cstdint>
#include <exception>
#include <optional>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "ssphere/geometry.hpp"
#include "ssphere/rng.hpp"
#include "ssphere/tilted.hpp"

namespace ssphere {

using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class SamplerId { exact, shell, gibbs };

const char* to_string(SamplerId id);
SamplerId sampler_from_string(std::string_view name);

/// Points (one per row) plus provenance.
struct SampleBatch {
  PointMatrix points;
  ManifoldSpec spec;
  SamplerId sampler = SamplerId::exact;
  std::uint64_t seed = 0;
  long long proposals = 0;
  long long accepts = 0;
  std::optional<ShellSpec> shell;
  std::optional<int> gibbs_sweeps;

  long long size() const { return points.rows(); }
};

/// Concatenates sub-batches in order. Counts add; provenance must match.
SampleBatch merge_batches(const std::vector<SampleBatch>& parts);

/// Checks every point: on_K for exact and gibbs, in_shell for shell.
/// Returns the index of the first failing point, or -1.
long long first_invalid_point(const SampleBatch& batch, double tol = kMembershipTol);

/// Zero accepts after this many proposals is taken as acceptance < 1e-6.
inline constexpr long long kInfeasibilityProbe = 1'000'000;

/// Draws Gaussian Z, keeps psi(Z) when its minimum coordinate is positive.
/// b == 1 returns copies of the all-ones point without sampling.
SampleBatch sample_exact(const ManifoldSpec& spec, long long count, Rng& rng,
                         long long probe = kInfeasibilityProbe);

/// Draws n i.i.d. G_{r,s} coordinates, keeps the vector when it lies in K^eps.
SampleBatch sample_shell(const ShellSpec& shell, const TiltedParams& p, long long count,
                         Rng& rng, long long probe = kInfeasibilityProbe);

/// Counts of a shell acceptance run at two thicknesses sharing the same proposals.
struct ShellAcceptance {
  long long proposals = 0;
  long long accepts_eps = 0;
  long long accepts_2eps = 0;
};

/// Proposal-only pass of sample_shell: counts how many of `proposals` i.i.d.
/// G_{r,s} vectors land in K^eps and in K^{2 eps}.
ShellAcceptance shell_acceptance(int n, double b, double eps, const TiltedParams& p,
                                 long long proposals, Rng& rng);

struct AngleInterval {
  double lo;
  double hi;
  double length() const { return hi - lo; }
};

/// Angles theta in [0, 2 pi) of the fiber circle
///   y(theta) = (s3/3) 1 + rho (cos theta e1 + sin theta e2),
///   e1 = (1, -1, 0)/sqrt 2, e2 = (1, 1, -2)/sqrt 6, rho^2 = q3 - s3^2/3,
/// where all three coordinates are positive. Intervals are sorted and disjoint.
std::vector<AngleInterval> arc_feasible_set(double s3, double q3);

/// Same set from the circle center c = s3/3 and radius rho.
std::vector<AngleInterval> arc_feasible_set_centered(double center, double radius);

/// Start state (n - (n-1) t, t, ..., t) with t = 1 - sqrt((b-1)/(n-1)).
Eigen::VectorXd gibbs_initial_point(const ManifoldSpec& spec);

class GibbsChain {
 public:
  GibbsChain(const ManifoldSpec& spec, Eigen::VectorXd start);
  explicit GibbsChain(const ManifoldSpec& spec);

  /// One move: a uniform 3-subset is resampled uniformly on its feasible arc.
  void step(Rng& rng);
  /// Resamples the given triple; exposed for the single-triple tests.
  /// Returns the angle drawn.
  double move_triple(int i, int j, int k, Rng& rng);
  /// n steps, then a psi re-projection to cancel roundoff drift.
  void sweep(Rng& rng);

  const Eigen::VectorXd& state() const { return x_; }
  const ManifoldSpec& spec() const { return spec_; }

 private:
  ManifoldSpec spec_;
  Eigen::VectorXd x_;
};

/// Runs burn_in sweeps from gibbs_initial_point, then records one point
/// every `sweeps` sweeps.
SampleBatch sample_gibbs(const ManifoldSpec& spec, long long count, int sweeps, int burn_in,
                         Rng& rng);

/// Splits `count` across `threads` workers; worker w gets seed_stream(seed, w)
/// and count/threads points (the first count%threads workers one more).
/// Results are merged in worker order, so the output depends only on
/// (seed, threads).
template <typename WorkerFn>
SampleBatch sample_parallel(long long count, std::uint64_t seed, int threads, WorkerFn&& fn) {
  if (threads < 1) threads = 1;
  std::vector<SampleBatch> parts(threads);
  std::vector<std::exception_ptr> errors(threads);
  auto job = [&](int w) {
    try {
      const long long share = count / threads + (w < count % threads ? 1 : 0);
      Rng rng = seed_stream(seed, static_cast<std::uint64_t>(w));
      parts[w] = fn(share, rng);
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (threads == 1) {
    job(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int w = 0; w < threads; ++w) pool.emplace_back(job, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  SampleBatch merged = merge_batches(parts);
  merged.seed = seed;
  return merged;
}

}  // namespace ssphere
