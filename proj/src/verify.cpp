#include "ssphere/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace ssphere {

namespace {

constexpr double kKsCoefficient1pct = 1.63;

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

double KSReport::standard_error() const {
  const double n_eff = n_samples_2 > 0
                           ? static_cast<double>(n_samples) * n_samples_2 / (n_samples + n_samples_2)
                           : static_cast<double>(n_samples);
  const double f = std::clamp(cdf_at_location, 0.0, 1.0);
  return std::max(std::sqrt(f * (1.0 - f) / n_eff), 0.26 / std::sqrt(n_eff));
}

KSReport ks_one_sample(std::span<const double> values, const std::function<double(double)>& cdf,
                       KSReference reference) {
  if (values.empty()) throw Error(ErrorKind::invalid_argument, "KS of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  KSReport rep;
  rep.n_samples = static_cast<long long>(v.size());
  rep.reference = reference;
  rep.critical_1pct = kKsCoefficient1pct / std::sqrt(n);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = cdf(v[i]);
    const double d = std::max(std::abs((i + 1) / n - f), std::abs(i / n - f));
    if (d > rep.statistic) {
      rep.statistic = d;
      rep.location = v[i];
      rep.cdf_at_location = f;
    }
  }
  return rep;
}

KSReport ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorKind::invalid_argument, "KS of an empty sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
  KSReport rep;
  rep.n_samples = static_cast<long long>(x.size());
  rep.n_samples_2 = static_cast<long long>(y.size());
  rep.critical_1pct = kKsCoefficient1pct * std::sqrt((nx + ny) / (nx * ny));
  std::size_t i = 0, j = 0;
  while (i < x.size() && j < y.size()) {
    const double t = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= t) ++i;
    while (j < y.size() && y[j] <= t) ++j;
    const double d = std::abs(i / nx - j / ny);
    if (d > rep.statistic) {
      rep.statistic = d;
      rep.location = t;
      rep.cdf_at_location = 0.5 * (i / nx + j / ny);
    }
  }
  return rep;
}

double reference_quantile(const std::function<double(double)>& cdf, double level) {
  double hi = 1.0;
  while (cdf(hi) < level) hi *= 2.0;
  double lo = 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < level ? lo : hi) = mid;
  }
  return hi;
}

double joint_cdf_distance(const PointMatrix& points, const std::function<double(double)>& cdf) {
  if (points.rows() == 0 || points.cols() < 2) {
    throw Error(ErrorKind::invalid_argument, "joint CDF distance needs points with n >= 2");
  }
  constexpr int kGrid = 10;
  std::array<double, kGrid> t{}, ft{};
  for (int g = 0; g < kGrid; ++g) {
    t[g] = reference_quantile(cdf, (g + 1.0) / (kGrid + 1.0));
    ft[g] = cdf(t[g]);
  }
  Eigen::MatrixXd count = Eigen::MatrixXd::Zero(kGrid, kGrid);
  for (Eigen::Index p = 0; p < points.rows(); ++p) {
    const double x1 = points(p, 0), x2 = points(p, 1);
    for (int a = 0; a < kGrid; ++a) {
      if (x1 > t[a]) continue;
      for (int c = 0; c < kGrid; ++c) {
        if (x2 <= t[c]) count(a, c) += 1.0;
      }
    }
  }
  double worst = 0.0;
  const double total = static_cast<double>(points.rows());
  for (int a = 0; a < kGrid; ++a) {
    for (int c = 0; c < kGrid; ++c) worst = std::max(worst, std::abs(count(a, c) / total - ft[a] * ft[c]));
  }
  return worst;
}

std::vector<MomentEntry> moment_report(const SampleBatch& batch, int k_max, int bootstrap_reps,
                                       std::optional<std::uint64_t> bootstrap_seed) {
  if (batch.size() == 0) throw Error(ErrorKind::invalid_argument, "moment report of an empty batch");
  if (k_max < 1 || k_max > 4) throw Error(ErrorKind::invalid_argument, "k_max must be in 1..4");
  const Eigen::Index rows = batch.points.rows();
  Rng rng(bootstrap_seed.value_or(batch.seed ^ 0x5bd1e995ULL));
  std::vector<MomentEntry> out;
  // per-point coordinate means of x^k
  Eigen::MatrixXd per_point(rows, k_max);
  for (Eigen::Index p = 0; p < rows; ++p) {
    const Eigen::ArrayXd x = batch.points.row(p).transpose().array();
    Eigen::ArrayXd power = x;
    for (int k = 1; k <= k_max; ++k) {
      per_point(p, k - 1) = power.mean();
      power *= x;
    }
  }
  const Eigen::RowVectorXd means = per_point.colwise().mean();
  Eigen::MatrixXd boot(bootstrap_reps, k_max);
  for (int r = 0; r < bootstrap_reps; ++r) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(k_max);
    for (Eigen::Index p = 0; p < rows; ++p) acc += per_point.row(static_cast<Eigen::Index>(rng.below(rows)));
    boot.row(r) = acc / static_cast<double>(rows);
  }
  for (int k = 1; k <= k_max; ++k) {
    const Eigen::ArrayXd col = boot.col(k - 1).array();
    const double se = bootstrap_reps > 1
                          ? std::sqrt((col - col.mean()).square().sum() / (bootstrap_reps - 1))
                          : 0.0;
    out.push_back({k, means[k - 1], se});
  }
  return out;
}

double quantile(std::vector<double> data, double level) {
  if (data.empty()) throw Error(ErrorKind::invalid_argument, "quantile of empty data");
  std::sort(data.begin(), data.end());
  const double pos = level * (data.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, data.size() - 1);
  return data[lo] + (pos - lo) * (data[hi] - data[lo]);
}

QuantileSummary summarize(std::vector<double> data) {
  return {quantile(data, 0.5), quantile(data, 0.05), quantile(data, 0.95)};
}

ExtremeSummary extreme_report(const SampleBatch& batch) {
  if (batch.size() == 0) throw Error(ErrorKind::invalid_argument, "extreme report of an empty batch");
  const int n = batch.spec.n;
  const double b = batch.spec.b;
  ExtremeSummary out;
  std::vector<double> m1, m2, rm2, rloc;
  for (Eigen::Index p = 0; p < batch.points.rows(); ++p) {
    double top = -INFINITY, second = -INFINITY;
    for (int i = 0; i < n; ++i) {
      const double v = batch.points(p, i);
      if (v > top) {
        second = top;
        top = v;
      } else if (v > second) {
        second = v;
      }
    }
    ExtremeReport e;
    e.M = top;
    e.M2 = second;
    e.ratio_m2 = second * second / n;
    if (b > 2.0) e.ratio_loc = top * top / ((b - 2.0) * n);
    m1.push_back(e.M);
    m2.push_back(e.M2);
    rm2.push_back(e.ratio_m2);
    if (e.ratio_loc) rloc.push_back(*e.ratio_loc);
    out.points.push_back(e);
  }
  out.M = summarize(m1);
  out.M2 = summarize(m2);
  out.ratio_m2 = summarize(rm2);
  if (!rloc.empty()) out.ratio_loc = summarize(rloc);
  return out;
}

double LLTReport::max_cov_z() const {
  double worst = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) worst = std::max(worst, std::abs(empirical_cov(i, j) - cov(i, j)) / cov_se(i, j));
  }
  return worst;
}

Eigen::Matrix2d llt_covariance(const TiltedParams& p) {
  const auto m = tilted_moments_closed_form(p).m;
  Eigen::Matrix2d c;
  c << m[2] - m[1] * m[1], m[3] - m[1] * m[2],
       m[3] - m[1] * m[2], m[4] - m[2] * m[2];
  if (!(c.determinant() >= 1e-12)) {
    throw Error(ErrorKind::degenerate_covariance, "Cov(Y, Y^2) is numerically singular");
  }
  return c;
}

LLTReport llt_check(const TiltedParams& p, int n, long long n_reps, int bins, Rng& rng) {
  if (n < 10) throw Error(ErrorKind::invalid_argument, "llt_check needs n >= 10");
  if (n_reps < 10'000) throw Error(ErrorKind::invalid_argument, "llt_check needs n_reps >= 1e4");
  if (bins < 1) throw Error(ErrorKind::invalid_argument, "llt_check needs bins >= 1");
  const auto m = tilted_moments_closed_form(p).m;
  LLTReport rep;
  rep.n = n;
  rep.n_reps = n_reps;
  rep.bins = bins;
  rep.cov = llt_covariance(p);
  rep.half_width_x = 4.0 * std::sqrt(rep.cov(0, 0));
  rep.half_width_y = 4.0 * std::sqrt(rep.cov(1, 1));
  const double dx = 2.0 * rep.half_width_x / bins;
  const double dy = 2.0 * rep.half_width_y / bins;

  TiltedSampler draw(p);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(bins, bins);
  // Known-mean moments of V: E[V V^T] and the spread of each product.
  Eigen::Matrix2d sum_prod = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d sum_prod_sq = Eigen::Matrix2d::Zero();
  for (long long t = 0; t < n_reps; ++t) {
    double a = 0.0, c = 0.0;
    for (int i = 0; i < n; ++i) {
      const double y = draw(rng);
      a += y - m[1];
      c += y * y - m[2];
    }
    const Eigen::Vector2d v(a * scale, c * scale);
    const Eigen::Matrix2d prod = v * v.transpose();
    sum_prod += prod;
    sum_prod_sq += prod.cwiseProduct(prod);
    const int ix = static_cast<int>(std::floor((v[0] + rep.half_width_x) / dx));
    const int iy = static_cast<int>(std::floor((v[1] + rep.half_width_y) / dy));
    if (ix >= 0 && ix < bins && iy >= 0 && iy < bins) counts(ix, iy) += 1.0;
  }
  const double reps = static_cast<double>(n_reps);
  rep.empirical_cov = sum_prod / reps;
  const Eigen::Matrix2d var = sum_prod_sq / reps - rep.empirical_cov.cwiseProduct(rep.empirical_cov);
  rep.cov_se = (var / reps).cwiseSqrt();

  rep.mass = counts / reps;
  rep.density = rep.mass / (dx * dy);
  const Eigen::Matrix2d inv = rep.cov.inverse();
  const double norm = 1.0 / (2.0 * std::numbers::pi * std::sqrt(rep.cov.determinant()));
  rep.rho.resize(bins, bins);
  for (int i = 0; i < bins; ++i) {
    for (int j = 0; j < bins; ++j) {
      const Eigen::Vector2d c(-rep.half_width_x + (i + 0.5) * dx, -rep.half_width_y + (j + 0.5) * dy);
      rep.rho(i, j) = norm * std::exp(-0.5 * c.dot(inv * c));
    }
  }
  rep.sup_err = (rep.density - rep.rho).cwiseAbs().maxCoeff();
  return rep;
}

const char* to_string(TestFunctional f) {
  switch (f) {
    case TestFunctional::one: return "one";
    case TestFunctional::first_at_most_one: return "first_at_most_one";
    case TestFunctional::first_clipped: return "first_clipped";
    case TestFunctional::max_at_most_two: return "max_at_most_two";
  }
  return "?";
}

TestFunctional functional_from_string(const std::string& name) {
  for (auto f : all_functionals()) {
    if (name == to_string(f)) return f;
  }
  throw Error(ErrorKind::invalid_argument, "unknown test functional '" + name + "'");
}

std::vector<TestFunctional> all_functionals() {
  return {TestFunctional::one, TestFunctional::first_at_most_one, TestFunctional::first_clipped,
          TestFunctional::max_at_most_two};
}

double evaluate(TestFunctional f, const Eigen::Ref<const Eigen::VectorXd>& x) {
  switch (f) {
    case TestFunctional::one: return 1.0;
    case TestFunctional::first_at_most_one: return x[0] <= 1.0 ? 1.0 : 0.0;
    case TestFunctional::first_clipped: return std::min(x[0], 2.0);
    case TestFunctional::max_at_most_two: return x.maxCoeff() <= 2.0 ? 1.0 : 0.0;
  }
  return 0.0;
}

double sandwich_constant(double b, const TiltedParams& p) { return 2.0 * b * p.r + 4.0 * std::abs(p.s); }

double shell_box_side(const ShellSpec& shell) {
  const double e = shell.eps;
  const double sd = std::sqrt(shell.b + shell.b * e - (1.0 + e) * (1.0 + e));
  return (1.0 + 2.0 * e) + sd * std::sqrt(shell.n - 1.0);
}

std::vector<SandwichReport> sandwich_check_all(const ShellSpec& shell, const TiltedParams& p,
                                               const std::vector<TestFunctional>& fs,
                                               long long n_reps, Rng& rng, long long max_proposals) {
  const ShellSpec sh = ShellSpec::make(shell.n, shell.b, shell.eps);
  require_admissible(p);
  if (sh.n > 12) throw Error(ErrorKind::invalid_argument, "sandwich_check box oracle needs n <= 12");
  if (n_reps < 1) throw Error(ErrorKind::invalid_argument, "sandwich_check needs n_reps >= 1");
  const ManifoldSpec spec = sh.manifold();
  const int n = sh.n;

  // Loose prefilter on the raw sums; membership() makes the final call.
  auto maybe_in_shell = [&](const Eigen::VectorXd& v) {
    const double dm = v.sum() / n - 1.0;
    const double dm2 = v.squaredNorm() / n - sh.b;
    const double slack = 1e-12;
    return dm > sh.eps - slack && dm < 2.0 * sh.eps + slack && dm2 > sh.eps - slack &&
           dm2 < sh.b * sh.eps + slack;
  };

  // Uniform law on K^eps by rejection from the box [0, L]^n.
  const double side = shell_box_side(sh);
  std::vector<Eigen::VectorXd> uniform_pts;
  long long uniform_prop = 0;
  Eigen::VectorXd x(n);
  while (static_cast<long long>(uniform_pts.size()) < n_reps && uniform_prop < max_proposals) {
    for (int i = 0; i < n; ++i) x[i] = side * rng.uniform_open();
    ++uniform_prop;
    if (maybe_in_shell(x) && membership(x, spec, sh) == Membership::in_shell) uniform_pts.push_back(x);
  }
  // Product law conditioned on K^eps.
  TiltedSampler draw(p);
  std::vector<Eigen::VectorXd> product_pts;
  long long product_prop = 0;
  while (static_cast<long long>(product_pts.size()) < n_reps && product_prop < max_proposals) {
    for (int i = 0; i < n; ++i) x[i] = draw(rng);
    ++product_prop;
    if (maybe_in_shell(x) && membership(x, spec, sh) == Membership::in_shell) product_pts.push_back(x);
  }
  if (uniform_pts.empty() || product_pts.empty()) {
    throw Error(ErrorKind::inconclusive,
                "sandwich check: " + std::to_string(uniform_pts.size()) + " uniform accepts in " +
                    std::to_string(uniform_prop) + " proposals, " +
                    std::to_string(product_pts.size()) + " product accepts in " +
                    std::to_string(product_prop) + " proposals");
  }

  auto mean_se = [](const std::vector<Eigen::VectorXd>& pts, TestFunctional f) {
    double s = 0.0, s2 = 0.0;
    for (const auto& v : pts) {
      const double y = evaluate(f, v);
      s += y;
      s2 += y * y;
    }
    const double k = static_cast<double>(pts.size());
    const double mean = s / k;
    const double var = k > 1 ? std::max(0.0, (s2 - k * mean * mean) / (k - 1)) : 0.0;
    return std::pair{mean, std::sqrt(var / k)};
  };

  const double B = sandwich_constant(sh.b, p);
  const double factor = std::exp(B * sh.eps * n);
  std::vector<SandwichReport> out;
  for (TestFunctional f : fs) {
    SandwichReport rep;
    rep.functional = f;
    rep.B = B;
    rep.factor = factor;
    std::tie(rep.uniform_mean, rep.uniform_se) = mean_se(uniform_pts, f);
    std::tie(rep.product_mean, rep.product_se) = mean_se(product_pts, f);
    rep.uniform_accepts = static_cast<long long>(uniform_pts.size());
    rep.uniform_proposals = uniform_prop;
    rep.product_accepts = static_cast<long long>(product_pts.size());
    rep.product_proposals = product_prop;
    rep.lhs = rep.uniform_mean / factor;
    rep.mid = rep.product_mean;
    rep.rhs = rep.uniform_mean * factor;
    const double lo_se = std::hypot(rep.uniform_se / factor, rep.product_se);
    const double hi_se = std::hypot(rep.uniform_se * factor, rep.product_se);
    rep.pass = rep.lhs - 3.0 * lo_se <= rep.mid && rep.mid <= rep.rhs + 3.0 * hi_se;
    out.push_back(rep);
  }
  return out;
}

SandwichReport sandwich_check(const ShellSpec& shell, const TiltedParams& p, TestFunctional f,
                              long long n_reps, Rng& rng, long long max_proposals) {
  return sandwich_check_all(shell, p, {f}, n_reps, rng, max_proposals).front();
}

RateProbe ks_rate_probe(std::vector<int> n, std::vector<double> ks, std::vector<double> se) {
  if (n.empty() || n.size() != ks.size() || n.size() != se.size()) {
    throw Error(ErrorKind::invalid_argument, "rate probe needs matching non-empty sequences");
  }
  RateProbe rp{std::move(n), std::move(ks), std::move(se)};
  auto rate = [](int m) { return std::sqrt(std::log(static_cast<double>(m)) / m); };
  rp.C = rp.ks[0] / rate(rp.n[0]);
  rp.nonincreasing = true;
  rp.within_rate = true;
  for (std::size_t i = 0; i < rp.n.size(); ++i) {
    rp.bound.push_back(1.5 * rp.C * rate(rp.n[i]));
    if (i == 0) continue;
    if (rp.ks[i] > rp.bound[i]) rp.within_rate = false;
    if (rp.ks[i] > rp.ks[i - 1] + 2.0 * std::hypot(rp.se[i], rp.se[i - 1])) rp.nonincreasing = false;
  }
  return rp;
}

bool moves_toward(const std::vector<double>& seq, double target) {
  for (std::size_t i = 1; i < seq.size(); ++i) {
    if (!(std::abs(seq[i] - target) < std::abs(seq[i - 1] - target))) return false;
  }
  return true;
}

bool strictly_decreasing(const std::vector<double>& seq) {
  for (std::size_t i = 1; i < seq.size(); ++i) {
    if (!(seq[i] < seq[i - 1])) return false;
  }
  return true;
}

nlohmann::json to_json(const KSReport& r) {
  const char* kind = r.reference.kind == KSReference::Kind::tilted ? "tilted"
                     : r.reference.kind == KSReference::Kind::exp1 ? "exp1"
                                                                   : "empirical";
  nlohmann::json j{{"statistic", r.statistic},
                   {"n_samples", r.n_samples},
                   {"critical_1pct", r.critical_1pct},
                   {"location", r.location},
                   {"standard_error", r.standard_error()},
                   {"reference", {{"kind", kind}}}};
  if (r.reference.kind == KSReference::Kind::tilted) {
    j["reference"]["r"] = r.reference.r;
    j["reference"]["s"] = r.reference.s;
  }
  if (r.n_samples_2 > 0) j["n_samples_2"] = r.n_samples_2;
  return j;
}

nlohmann::json to_json(const std::vector<MomentEntry>& m) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : m) arr.push_back({{"k", e.k}, {"mean", e.mean}, {"standard_error", e.standard_error}});
  return arr;
}

nlohmann::json to_json(const QuantileSummary& q) {
  return {{"median", q.median}, {"q05", q.q05}, {"q95", q.q95}};
}

nlohmann::json to_json(const ExtremeSummary& e) {
  nlohmann::json j{{"points", e.points.size()},
                   {"M", to_json(e.M)},
                   {"M2", to_json(e.M2)},
                   {"ratio_m2", to_json(e.ratio_m2)}};
  j["ratio_loc"] = e.ratio_loc ? to_json(*e.ratio_loc) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json to_json(const LLTReport& r, bool include_grids) {
  nlohmann::json j{{"n", r.n},
                   {"n_reps", r.n_reps},
                   {"bins", r.bins},
                   {"half_width_x", r.half_width_x},
                   {"half_width_y", r.half_width_y},
                   {"sup_err", r.sup_err},
                   {"cov", matrix_json(r.cov)},
                   {"empirical_cov", matrix_json(r.empirical_cov)},
                   {"cov_se", matrix_json(r.cov_se)},
                   {"max_cov_z", r.max_cov_z()}};
  if (include_grids) {
    j["mass"] = matrix_json(r.mass);
    j["rho"] = matrix_json(r.rho);
  }
  return j;
}

nlohmann::json to_json(const SandwichReport& r) {
  return {{"functional", to_string(r.functional)},
          {"B", r.B},
          {"factor", r.factor},
          {"uniform_mean", r.uniform_mean},
          {"uniform_se", r.uniform_se},
          {"product_mean", r.product_mean},
          {"product_se", r.product_se},
          {"uniform_accepts", r.uniform_accepts},
          {"uniform_proposals", r.uniform_proposals},
          {"product_accepts", r.product_accepts},
          {"product_proposals", r.product_proposals},
          {"lhs", r.lhs},
          {"mid", r.mid},
          {"rhs", r.rhs},
          {"pass", r.pass}};
}

nlohmann::json to_json(const RateProbe& r) {
  return {{"n", r.n},         {"ks", r.ks},       {"se", r.se},
          {"C", r.C},         {"bound", r.bound}, {"nonincreasing", r.nonincreasing},
          {"within_rate", r.within_rate}};
}

}  // namespace ssphere
