#pragma once

// Statistical reductions that turn sample batches into pass/fail evidence.

#include <Eigen/Dense>
#include <json.hpp>

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ssphere/samplers.hpp"
#include "ssphere/tilted.hpp"

namespace ssphere {

struct KSReference {
  enum class Kind { tilted, exp1, empirical } kind = Kind::empirical;
  double r = 0.0;
  double s = 0.0;

  static KSReference tilted(const TiltedParams& p) { return {Kind::tilted, p.r, p.s}; }
  static KSReference exp1() { return {Kind::exp1, 0.0, 1.0}; }
  static KSReference empirical() { return {}; }
};

struct KSReport {
  double statistic = 0.0;
  long long n_samples = 0;
  long long n_samples_2 = 0;  // second sample size, two-sample tests only
  KSReference reference;
  double critical_1pct = 0.0;
  double location = 0.0;       // where the supremum is attained
  double cdf_at_location = 0.0;

  bool passes_1pct() const { return statistic <= critical_1pct; }
  /// sqrt(F(1-F)/N_eff) at the supremum, floored at the null spread 0.26/sqrt(N_eff).
  double standard_error() const;
};

/// sup_i max(|i/N - F(v_i)|, |(i-1)/N - F(v_i)|) over the sorted values.
KSReport ks_one_sample(std::span<const double> values, const std::function<double(double)>& cdf,
                       KSReference reference = KSReference::empirical());

KSReport ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Supremum over a 10x10 grid of reference quantiles of
/// |P_emp(X1 <= t, X2 <= u) - F(t) F(u)|. A grid approximation of the joint
/// KS distance for k = 2.
double joint_cdf_distance(const PointMatrix& points, const std::function<double(double)>& cdf);

/// Smallest t with cdf(t) >= level, by bisection on [0, hi].
double reference_quantile(const std::function<double(double)>& cdf, double level);

struct MomentEntry {
  int k = 0;
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Coordinate-pooled k-th moments for k = 1..k_max (<= 4). Standard errors
/// come from a bootstrap that resamples whole points.
std::vector<MomentEntry> moment_report(const SampleBatch& batch, int k_max,
                                       int bootstrap_reps = 200,
                                       std::optional<std::uint64_t> bootstrap_seed = std::nullopt);

struct ExtremeReport {
  double M = 0.0;
  double M2 = 0.0;
  std::optional<double> ratio_loc;  // M^2 / ((b-2) n), only when b > 2
  double ratio_m2 = 0.0;            // M2^2 / n
};

struct QuantileSummary {
  double median = 0.0;
  double q05 = 0.0;
  double q95 = 0.0;
};

struct ExtremeSummary {
  std::vector<ExtremeReport> points;
  QuantileSummary M, M2, ratio_m2;
  std::optional<QuantileSummary> ratio_loc;
};

ExtremeSummary extreme_report(const SampleBatch& batch);

/// Linear-interpolation quantile (R type 7) of unsorted data.
double quantile(std::vector<double> data, double level);
QuantileSummary summarize(std::vector<double> data);

struct LLTReport {
  int n = 0;
  long long n_reps = 0;
  int bins = 0;
  double half_width_x = 0.0;  // rectangle is [-hx, hx] x [-hy, hy]
  double half_width_y = 0.0;
  Eigen::MatrixXd mass;     // bin probabilities (row: first component)
  Eigen::MatrixXd density;  // mass / bin area
  Eigen::MatrixXd rho;      // limiting Gaussian density at bin centers
  double sup_err = 0.0;
  Eigen::Matrix2d cov;            // Cov(Y, Y^2) from the tilted moments
  Eigen::Matrix2d empirical_cov;  // of the simulated V_n
  Eigen::Matrix2d cov_se;         // standard errors of empirical_cov

  /// Largest |empirical - cov| measured in standard errors.
  double max_cov_z() const;
};

/// Limiting covariance of (Y, Y^2) for Y ~ G_{r,s}; throws
/// degenerate_covariance when its determinant is below 1e-12.
Eigen::Matrix2d llt_covariance(const TiltedParams& p);

/// Simulates V_n = n^{-1/2} (sum (Y_i - m1), sum (Y_i^2 - m2)) n_reps times
/// and compares its histogram on the +-4 sd rectangle with the Gaussian limit.
LLTReport llt_check(const TiltedParams& p, int n, long long n_reps, int bins, Rng& rng);

enum class TestFunctional { one, first_at_most_one, first_clipped, max_at_most_two };

const char* to_string(TestFunctional f);
TestFunctional functional_from_string(const std::string& name);
std::vector<TestFunctional> all_functionals();
double evaluate(TestFunctional f, const Eigen::Ref<const Eigen::VectorXd>& x);

struct SandwichReport {
  TestFunctional functional = TestFunctional::one;
  double B = 0.0;        // 2 b r + 4 |s|
  double factor = 0.0;   // exp(B eps n)
  double uniform_mean = 0.0, uniform_se = 0.0;
  double product_mean = 0.0, product_se = 0.0;
  long long uniform_accepts = 0, uniform_proposals = 0;
  long long product_accepts = 0, product_proposals = 0;
  double lhs = 0.0, mid = 0.0, rhs = 0.0;
  bool pass = false;
};

/// B = 2 b r + 4 |s|.
double sandwich_constant(double b, const TiltedParams& p);

/// Half-width of a box [0, L]^n that contains K^eps: mean + sd sqrt(n-1).
double shell_box_side(const ShellSpec& shell);

/// E f under the uniform law on K^eps (box rejection) against E(f(Y) | Y in K^eps)
/// (product-law rejection); each side collects up to n_reps accepts within
/// max_proposals proposals. Passes when exp(-B eps n) E f(X) <= E f(Y|K^eps)
/// <= exp(B eps n) E f(X) after widening by 3 combined standard errors.
SandwichReport sandwich_check(const ShellSpec& shell, const TiltedParams& p, TestFunctional f,
                              long long n_reps, Rng& rng,
                              long long max_proposals = 2'000'000'000LL);

/// Several functionals evaluated on one pair of accepted sets.
std::vector<SandwichReport> sandwich_check_all(const ShellSpec& shell, const TiltedParams& p,
                                               const std::vector<TestFunctional>& fs,
                                               long long n_reps, Rng& rng,
                                               long long max_proposals = 2'000'000'000LL);

struct RateProbe {
  std::vector<int> n;
  std::vector<double> ks;
  std::vector<double> se;
  double C = 0.0;               // fitted from the first entry
  std::vector<double> bound;    // 1.5 C sqrt(log n / n)
  bool nonincreasing = false;   // within 2 combined standard errors
  bool within_rate = false;     // every later entry under its bound
};

/// Fits C = KS(n_0) / sqrt(log n_0 / n_0) and checks the remaining entries
/// against 1.5 C sqrt(log n / n).
RateProbe ks_rate_probe(std::vector<int> n, std::vector<double> ks, std::vector<double> se);

/// True when the sequence moves toward `target` at every step (distance strictly decreasing).
bool moves_toward(const std::vector<double>& seq, double target);
bool strictly_decreasing(const std::vector<double>& seq);

nlohmann::json to_json(const KSReport& r);
nlohmann::json to_json(const std::vector<MomentEntry>& m);
nlohmann::json to_json(const QuantileSummary& q);
nlohmann::json to_json(const ExtremeSummary& e);
nlohmann::json to_json(const LLTReport& r, bool include_grids = false);
nlohmann::json to_json(const SandwichReport& r);
nlohmann::json to_json(const RateProbe& r);

}  // namespace ssphere
