// Runs every acceptance criterion and prints one PASS/FAIL line for each.
// Exit status is 0 only when all criteria pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "ssphere/experiment.hpp"
#include "ssphere/verify.hpp"
#include "support/oracles.hpp"

using namespace ssphere;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<double> column(const SampleBatch& batch, int j, long long from = 0, long long to = -1) {
  if (to < 0) to = batch.size();
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(to - from));
  for (long long i = from; i < to; ++i) out.push_back(batch.points(i, j));
  return out;
}

SampleBatch gibbs_batch(int n, double b, long long count, int sweeps, int burn_in, std::uint64_t seed,
                        int workers) {
  const auto spec = ManifoldSpec::make(n, b);
  return sample_parallel(count, seed, workers, [&](long long k, Rng& rng) {
    return sample_gibbs(spec, k, sweeps, burn_in, rng);
  });
}

Outcome c1_solver_boundary() {
  const auto p = solve_params(2.0);
  const bool ok = std::abs(p.r) <= 1e-6 && std::abs(p.s - 1.0) <= 1e-6;
  return {ok, fmt("solve_params(2) = (%.3g, %.15g)", p.r, p.s)};
}

Outcome c2_moment_round_trip() {
  bool ok = true;
  double worst_m1 = 0.0, worst_m2 = 0.0;
  for (double b : {1.05, 1.2, 1.5, 1.8, 2.0}) {
    const auto m = tilted_moments(solve_params(b));
    worst_m1 = std::max(worst_m1, std::abs(m.m[1] - 1.0));
    worst_m2 = std::max(worst_m2, std::abs(m.m[2] - b));
  }
  ok = worst_m1 <= 1e-8 && worst_m2 <= 1e-8;
  const auto grid = ssphere::testing::moment_grid();
  double worst_route = 0.0;
  for (const auto& p : grid) {
    worst_route = std::max(worst_route, moment_route_discrepancy(tilted_moments_closed_form(p),
                                                                 tilted_moments_quadrature(p)));
  }
  ok = ok && grid.size() == 100 && worst_route <= 1e-10;
  return {ok, fmt("max |m1-1| %.2e, max |m2-b| %.2e, route discrepancy %.2e over %zu pairs", worst_m1,
                  worst_m2, worst_route, grid.size())};
}

Outcome c3_exact_validity() {
  bool ok = true;
  std::string detail;
  for (double b : {1.5, 2.0}) {
    Rng rng = seed_stream(3000, 0);
    const auto batch = sample_exact(ManifoldSpec::make(20, b), 10'000, rng);
    double worst = 0.0;
    for (long long i = 0; i < batch.size(); ++i) {
      worst = std::max({worst, std::abs(batch.points.row(i).sum() - 20.0),
                        std::abs(batch.points.row(i).squaredNorm() - 20.0 * b)});
    }
    const bool constraints = batch.size() == 10'000 && worst <= 1e-9 * 20 && batch.points.minCoeff() > 0;
    // x1 and x2 from disjoint halves, so the two samples are independent.
    const auto ks = ks_two_sample(column(batch, 0, 0, 5000), column(batch, 1, 5000, 10'000));
    ok = ok && constraints && ks.passes_1pct();
    detail += fmt("b=%.1f: max constraint error %.1e, KS %.4f (crit %.4f, acceptance %.2e); ", b, worst,
                  ks.statistic, ks.critical_1pct, double(batch.accepts) / batch.proposals);
  }
  return {ok, detail};
}

Outcome c4_gibbs_exact() {
  const auto spec = ManifoldSpec::make(8, 1.5);
  int passes = 0;
  std::string detail;
  for (std::uint64_t seed : {41, 42, 43}) {
    Rng rg = seed_stream(seed, 0), re = seed_stream(seed, 1);
    const auto gibbs = sample_gibbs(spec, 10'000, 10, 1000, rg);
    const auto exact = sample_exact(spec, 10'000, re);
    const auto ks = ks_two_sample(column(gibbs, 0), column(exact, 0));
    passes += ks.passes_1pct();
    detail += fmt("seed %d KS %.4f; ", int(seed), ks.statistic);
  }
  detail += fmt("critical %.4f, %d of 3 seeds", 1.63 * std::sqrt(2.0 / 1e4), passes);
  return {passes == 3, detail};
}

Outcome c5_marginal_rate() {
  const double b = 1.5;
  const auto p = solve_params(b);
  auto cdf = [p](double x) { return tilted_cdf(p, x); };
  const std::vector<int> ns = {50, 100, 200, 400};
  std::vector<double> ks, se;
  for (int n : ns) {
    const auto batch = gibbs_batch(n, b, 100'000, 5, 1000, 5000 + n, 4);
    const auto rep = ks_one_sample(column(batch, 0), cdf, KSReference::tilted(p));
    ks.push_back(rep.statistic);
    se.push_back(rep.standard_error());
  }
  const auto probe = ks_rate_probe(ns, ks, se);
  std::string detail = fmt("C=%.3f; ", probe.C);
  for (std::size_t i = 0; i < ns.size(); ++i)
    detail += fmt("n=%d KS %.4f (se %.4f, bound %.4f); ", ns[i], ks[i], se[i], probe.bound[i]);
  detail += fmt("nonincreasing %s, within rate %s", probe.nonincreasing ? "yes" : "no",
                probe.within_rate ? "yes" : "no");
  return {probe.nonincreasing && probe.within_rate, detail};
}

std::map<int, SampleBatch>& thm2_batches() {
  static std::map<int, SampleBatch> batches;
  if (batches.empty()) {
    for (int n : {100, 400, 1600}) batches[n] = gibbs_batch(n, 3.0, 500, 10, 2000, 6000 + n, 1);
  }
  return batches;
}

Outcome c6_localization() {
  std::vector<double> loc, m2;
  std::string detail;
  for (auto& [n, batch] : thm2_batches()) {
    const auto e = extreme_report(batch);
    loc.push_back(e.ratio_loc->median);
    m2.push_back(e.ratio_m2.median);
    detail += fmt("n=%d median M^2/((b-2)n) %.4f, median M2^2/n %.4f; ", n, loc.back(), m2.back());
  }
  const bool window = loc.back() >= 0.5 && loc.back() <= 1.5;
  const bool toward = moves_toward(loc, 1.0);
  const bool down = strictly_decreasing(m2);
  detail += fmt("window %s, toward 1 %s, M2 decreasing %s", window ? "yes" : "no", toward ? "yes" : "no",
                down ? "yes" : "no");
  return {window && toward && down, detail};
}

Outcome c7_second_moment_gap() {
  bool ok = true;
  std::string detail;
  for (auto& [n, batch] : thm2_batches()) {
    const auto m = moment_report(batch, 2, 20, 1);
    const double second = m[1].mean;
    ok = ok && std::abs(second - 3.0) <= 1e-9 && second - 2.0 > 0.9;
    detail += fmt("n=%d E x^2 - 3 = %.1e, gap to Exp(1) %.6f; ", n, second - 3.0, second - 2.0);
  }
  return {ok, detail};
}

Outcome c8_extreme_scaling() {
  bool ok = true;
  std::string detail;
  for (double b : {1.5, 2.0}) {
    std::vector<double> scaled;
    for (int n : {100, 400, 1600}) {
      const auto batch = gibbs_batch(n, b, 1000, 5, 1000, 8000 + n + int(10 * b), 1);
      const double growth = b < 2.0 ? std::sqrt(std::log(n)) : std::log(n);
      scaled.push_back(extreme_report(batch).M.median / growth);
    }
    const double factor = *std::max_element(scaled.begin(), scaled.end()) / scaled.front();
    ok = ok && factor <= 1.5;
    detail += fmt("b=%.1f: %.3f %.3f %.3f (max/first %.3f); ", b, scaled[0], scaled[1], scaled[2], factor);
  }
  return {ok, detail};
}

Outcome c9_llt() {
  Rng rng = seed_stream(9000, 0);
  const TiltedParams p{0.0, 1.0};
  const auto r50 = llt_check(p, 50, 100'000, 25, rng);
  const auto r400 = llt_check(p, 400, 100'000, 25, rng);
  const bool cov_ok = r50.max_cov_z() <= 5.0 && r400.max_cov_z() <= 5.0 &&
                      r50.cov.isApprox((Eigen::Matrix2d() << 1, 4, 4, 20).finished(), 1e-12);
  const bool decreasing = r400.sup_err < r50.sup_err;
  return {cov_ok && decreasing,
          fmt("cov z-scores %.2f (n=50), %.2f (n=400); sup_err %.4f -> %.4f", r50.max_cov_z(), r400.max_cov_z(),
              r50.sup_err, r400.sup_err)};
}

Outcome c10_sandwich() {
  bool ok = true;
  std::string detail;
  for (double b : {1.5, 2.0}) {
    Rng rng = seed_stream(10'000 + int(10 * b), 0);
    const auto shell = ShellSpec::make(10, b, 0.05);
    const auto p = solve_params(b);
    for (const auto& r : sandwich_check_all(shell, p, all_functionals(), 10'000, rng)) {
      ok = ok && r.pass;
      detail += fmt("b=%.1f %s %.3f<=%.3f<=%.3f %s; ", b, to_string(r.functional), r.lhs, r.mid, r.rhs,
                    r.pass ? "ok" : "FAIL");
    }
  }
  return {ok, detail};
}

Outcome c11_shell_scaling() {
  // nε² is the small-ε law; ε = 0.005 keeps the curvature of the product density
  // across the shell below the Monte Carlo resolution.
  const double eps = 0.005;
  Rng rng = seed_stream(11'000, 0);
  const auto c = shell_acceptance(100, 2.0, eps, {0.0, 1.0}, 30'000'000, rng);
  const double ratio = double(c.accepts_2eps) / c.accepts_eps;
  const double se = ratio * std::sqrt(1.0 / c.accepts_eps + 1.0 / c.accepts_2eps);
  const bool ok = c.accepts_eps > 0 && std::abs(ratio - 4.0) <= 3.0 * se;
  return {ok, fmt("eps=%.3f: %lld and %lld accepts in %lld proposals, ratio %.3f (3 se = %.3f)", eps,
                  c.accepts_eps, c.accepts_2eps, c.proposals, ratio, 3.0 * se)};
}

std::map<std::string, std::string> read_dir(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().filename() == "timing.json") continue;
    std::ifstream is(e.path(), std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    out[e.path().filename().string()] = os.str();
  }
  return out;
}

Outcome c12_reproducibility() {
  std::vector<ExperimentConfig> cs;
  ExperimentConfig c;
  c.subcommand = Subcommand::solve_params;
  cs.push_back(c);
  c = {};
  c.subcommand = Subcommand::sample;
  c.n = 12;
  c.b = 1.7;
  c.n_samples = 200;
  for (auto s : {SamplerId::exact, SamplerId::gibbs}) {
    c.sampler = s;
    cs.push_back(c);
  }
  c.sampler = SamplerId::shell;
  c.n = 8;
  c.eps = 0.1;
  cs.push_back(c);
  c = {};
  c.subcommand = Subcommand::verify_thm1;
  c.sampler = SamplerId::gibbs;
  c.n_list = {20, 40};
  c.n_samples = 300;
  c.burn_in = 100;
  cs.push_back(c);
  c = {};
  c.subcommand = Subcommand::verify_thm2;
  c.n_list = {30, 60};
  c.n_samples = 50;
  c.burn_in = 100;
  cs.push_back(c);
  c = {};
  c.subcommand = Subcommand::verify_thm3;
  c.sampler = SamplerId::gibbs;
  c.n_list = {20, 40};
  c.n_samples = 300;
  c.burn_in = 100;
  cs.push_back(c);
  c = {};
  c.subcommand = Subcommand::llt_check;
  c.n_list = {10, 20};
  c.n_reps = 10'000;
  cs.push_back(c);
  c = {};
  c.subcommand = Subcommand::sandwich_check;
  c.n = 6;
  c.eps = 0.1;
  c.n_reps = 300;
  cs.push_back(c);

  const fs::path root = fs::temp_directory_path() / "ssphere_acceptance_repro";
  int identical = 0;
  std::string detail;
  for (auto& cfg : cs) {
    for (auto format : {OutputFormat::json, OutputFormat::csv}) {
      cfg.format = format;
      cfg.threads = 1;
      cfg.seed = 12;
      cfg.out_dir = root / to_string(cfg.subcommand);
      std::map<std::string, std::string> runs[2];
      int codes[2];
      for (int k = 0; k < 2; ++k) {
        fs::remove_all(cfg.out_dir);
        std::ostringstream out, err;
        codes[k] = run(cfg, out, err);
        runs[k] = read_dir(cfg.out_dir);
      }
      const bool same = codes[0] == codes[1] && runs[0] == runs[1] && !runs[0].empty();
      identical += same;
      if (!same) detail += fmt("%s differs; ", to_string(cfg.subcommand));
    }
  }
  fs::remove_all(root);
  const int total = static_cast<int>(2 * cs.size());
  detail += fmt("%d of %d configurations byte-identical (all subcommands, json and csv)", identical, total);
  return {identical == total, detail};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> fn;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "solver exactness at b=2", 1.0, c1_solver_boundary},
      {2, "moment round-trip and route agreement", 10.0, c2_moment_round_trip},
      {3, "exact sampler validity", 60.0, c3_exact_validity},
      {4, "gibbs vs exact marginals", 120.0, c4_gibbs_exact},
      {5, "marginal KS convergence rate", 600.0, c5_marginal_rate},
      {6, "localization trend at b=3", 900.0, c6_localization},
      {7, "second-moment gap at b=3", 900.0, c7_second_moment_gap},
      {8, "extreme scaling", 600.0, c8_extreme_scaling},
      {9, "local limit theorem", 300.0, c9_llt},
      {10, "sandwich bounds", 300.0, c10_sandwich},
      {11, "shell acceptance scaling", 120.0, c11_shell_scaling},
      {12, "reproducibility", 600.0, c12_reproducibility},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = secs <= c.budget_seconds;
    const bool pass = o.pass && in_budget;
    failed += !pass;
    std::printf("%s criterion %2d (%s): %s [%.1fs of %.0fs%s]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.budget_seconds, in_budget ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
