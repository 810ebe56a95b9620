#include "ssphere/experiment.hpp"

#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "ssphere/batch_io.hpp"
#include "ssphere/verify.hpp"

namespace ssphere {

namespace {

using nlohmann::json;

struct Outcome {
  json report;
  bool pass = true;
};

std::vector<int> or_default(const std::vector<int>& v, std::vector<int> d) { return v.empty() ? d : v; }
std::vector<double> or_default(const std::vector<double>& v, std::vector<double> d) {
  return v.empty() ? d : v;
}

bool is_sampling(Subcommand c) {
  return c == Subcommand::sample || c == Subcommand::verify_thm1 || c == Subcommand::verify_thm2 ||
         c == Subcommand::verify_thm3 || c == Subcommand::sandwich_check;
}

void require_b_range(int n, double b) {
  if (!(b > 1.0) || !(b < n)) {
    std::ostringstream os;
    os << "b must satisfy 1 < b < n (got n=" << n << ", b=" << b << ")";
    throw Error(ErrorKind::spec_invalid, os.str());
  }
}

json config_json(const ExperimentConfig& c) {
  json j{{"subcommand", to_string(c.subcommand)},
         {"n", c.n},
         {"b", c.b},
         {"sampler", to_string(c.sampler)},
         {"n_samples", c.n_samples},
         {"seed", c.seed},
         {"threads", c.threads},
         {"out_dir", c.out_dir.generic_string()},
         {"format", c.format == OutputFormat::json ? "json" : "csv"},
         {"sweeps", c.sweeps},
         {"burn_in", c.burn_in},
         {"n_list", c.n_list},
         {"b_list", c.b_list},
         {"r", c.r},
         {"s", c.s},
         {"n_reps", c.n_reps},
         {"bins", c.bins}};
  j["eps"] = c.eps ? json(*c.eps) : json(nullptr);
  return j;
}

json batch_json(const SampleBatch& batch) {
  return {{"sampler", to_string(batch.sampler)}, {"n", batch.spec.n},
          {"b", batch.spec.b},                   {"seed", batch.seed},
          {"points", batch.size()},              {"proposals", batch.proposals},
          {"accepts", batch.accepts}};
}

std::vector<double> first_coordinates(const SampleBatch& batch) {
  const Eigen::VectorXd col = batch.points.col(0);
  return {col.data(), col.data() + col.size()};
}

Outcome do_solve_params(const ExperimentConfig& c, std::ostream& out) {
  SolveTrace trace;
  const TiltedParams p = solve_params(c.b, &trace);
  const TiltedMoments m = tilted_moments(p);
  out << "r=" << format_double(p.r) << " s=" << format_double(p.s) << '\n';
  json row{{"b", c.b}, {"r", p.r}, {"s", p.s}, {"m1", m.m[1]}, {"m2", m.m[2]},
           {"m3", m.m[3]}, {"m4", m.m[4]}, {"theta", m.theta()}};
  return {{{"b", c.b},
           {"r", p.r},
           {"s", p.s},
           {"moments", {m.m[1], m.m[2], m.m[3], m.m[4]}},
           {"z", m.z},
           {"newton_iterations", trace.iterations},
           {"residual", trace.residual},
           {"table", json::array({row})}},
          true};
}

Outcome do_verify_thm1(const ExperimentConfig& c, std::ostream& out) {
  const auto bs = or_default(c.b_list, {1.2, 1.5, 2.0});
  const auto ns = or_default(c.n_list, {50, 100, 200, 400});
  Outcome o;
  json runs = json::array(), table = json::array();
  std::uint64_t index = 0;
  for (double b : bs) {
    const TiltedParams p = solve_params(b);
    const TiltedMoments tm = tilted_moments(p);
    auto cdf = [p](double x) { return tilted_cdf(p, x); };
    std::vector<double> ks, se, extreme;
    json per_n = json::array();
    bool moments_exact = true;
    for (int n : ns) {
      const ManifoldSpec spec = ManifoldSpec::make(n, b);
      const SampleBatch batch = draw_batch(spec, c.sampler, c.n_samples, derive_seed(c.seed, index++),
                                           c.threads, c.sweeps, c.burn_in);
      const auto x1 = first_coordinates(batch);
      const KSReport rep = ks_one_sample(x1, cdf, KSReference::tilted(p));
      const auto mom = moment_report(batch, 4);
      const auto ext = extreme_report(batch);
      const double growth = b < 2.0 ? std::sqrt(std::log(n)) : std::log(n);
      ks.push_back(rep.statistic);
      se.push_back(rep.standard_error());
      extreme.push_back(ext.M.median / growth);
      moments_exact = moments_exact && std::abs(mom[0].mean - 1.0) <= 1e-9 &&
                      std::abs(mom[1].mean - b) <= 1e-9;
      per_n.push_back({{"n", n}, {"batch", batch_json(batch)}, {"ks", to_json(rep)},
                       {"moments", to_json(mom)}, {"extremes", to_json(ext)},
                       {"median_M_over_growth", extreme.back()}});
      table.push_back({{"b", b}, {"n", n}, {"ks", rep.statistic}, {"ks_se", rep.standard_error()},
                       {"m3", mom[2].mean}, {"m3_se", mom[2].standard_error},
                       {"m3_limit", tm.m[3]}, {"median_M_over_growth", extreme.back()}});
      out << "b=" << b << " n=" << n << " KS=" << rep.statistic << '\n';
    }
    const RateProbe probe = ks_rate_probe(ns, ks, se);
    const double max_growth = *std::max_element(extreme.begin(), extreme.end()) / extreme.front();
    const bool extremes_ok = max_growth <= 1.5;
    const bool pass = probe.nonincreasing && moments_exact && extremes_ok;
    o.pass = o.pass && pass;
    runs.push_back({{"b", b}, {"r", p.r}, {"s", p.s}, {"per_n", per_n}, {"rate", to_json(probe)},
                    {"extreme_growth_factor", max_growth},
                    {"checks", {{"ks_nonincreasing", probe.nonincreasing},
                                {"moments_exact", moments_exact},
                                {"extremes_bounded", extremes_ok}}},
                    {"pass", pass}});
  }
  o.report = {{"runs", runs}, {"table", table}, {"pass", o.pass}};
  return o;
}

Outcome do_verify_thm2(const ExperimentConfig& c, std::ostream& out) {
  const double b = c.b_list.empty() ? (c.b > 2.0 ? c.b : 3.0) : c.b_list.front();
  if (!(b > 2.0)) throw Error(ErrorKind::spec_invalid, "verify-thm2 needs b > 2");
  const auto ns = or_default(c.n_list, {100, 400, 1600});
  json per_n = json::array(), table = json::array();
  std::vector<double> loc, m2r;
  bool gap_ok = true;
  std::uint64_t index = 0;
  for (int n : ns) {
    const ManifoldSpec spec = ManifoldSpec::make(n, b);
    const SampleBatch batch = draw_batch(spec, SamplerId::gibbs, c.n_samples, derive_seed(c.seed, index++),
                                         c.threads, c.sweeps, c.burn_in);
    const auto ext = extreme_report(batch);
    const auto mom = moment_report(batch, 2);
    const auto x1 = first_coordinates(batch);
    const KSReport rep = ks_one_sample(x1, [](double x) { return -std::expm1(-x); }, KSReference::exp1());
    loc.push_back(ext.ratio_loc->median);
    m2r.push_back(ext.ratio_m2.median);
    const double second = mom[1].mean;
    const bool gap = std::abs(second - b) <= 1e-9 && second - 2.0 > 0.9;
    gap_ok = gap_ok && gap;
    per_n.push_back({{"n", n}, {"batch", batch_json(batch)}, {"extremes", to_json(ext)},
                     {"moments", to_json(mom)}, {"ks_exp1", to_json(rep)},
                     {"second_moment_gap", second - 2.0}});
    table.push_back({{"n", n}, {"median_ratio_loc", loc.back()}, {"median_ratio_m2", m2r.back()},
                     {"second_moment", second}, {"ks_exp1", rep.statistic}});
    out << "n=" << n << " median M^2/((b-2)n)=" << loc.back() << " median M2^2/n=" << m2r.back() << '\n';
  }
  const bool last_in_window = loc.back() >= 0.5 && loc.back() <= 1.5;
  const bool toward_one = moves_toward(loc, 1.0);
  const bool m2_down = strictly_decreasing(m2r);
  const bool pass = last_in_window && toward_one && m2_down && gap_ok;
  return {{{"b", b},
           {"per_n", per_n},
           {"table", table},
           {"checks", {{"ratio_loc_window_at_largest_n", last_in_window},
                       {"ratio_loc_moves_toward_one", toward_one},
                       {"ratio_m2_decreasing", m2_down},
                       {"second_moment_gap", gap_ok}}},
           {"pass", pass}},
          pass};
}

Outcome do_verify_thm3(const ExperimentConfig& c, std::ostream& out) {
  const double b = c.b_list.empty() ? c.b : c.b_list.front();
  const auto ns = or_default(c.n_list, {50, 100, 200, 400});
  const TiltedParams p = solve_params(b);
  auto cdf = [p](double x) { return tilted_cdf(p, x); };
  std::vector<double> ks, se, joint;
  json per_n = json::array(), table = json::array();
  std::uint64_t index = 0;
  for (int n : ns) {
    const ManifoldSpec spec = ManifoldSpec::make(n, b);
    const SampleBatch batch = draw_batch(spec, c.sampler, c.n_samples, derive_seed(c.seed, index++),
                                         c.threads, c.sweeps, c.burn_in);
    const auto x1 = first_coordinates(batch);
    const KSReport rep = ks_one_sample(x1, cdf, KSReference::tilted(p));
    ks.push_back(rep.statistic);
    se.push_back(rep.standard_error());
    joint.push_back(joint_cdf_distance(batch.points, cdf));
    per_n.push_back({{"n", n}, {"batch", batch_json(batch)}, {"ks", to_json(rep)}, {"joint_grid_distance", joint.back()}});
    table.push_back({{"n", n}, {"ks", rep.statistic}, {"ks_se", rep.standard_error()},
                     {"joint_grid_distance", joint.back()}, {"rate", std::sqrt(std::log(n) / n)}});
    out << "n=" << n << " KS=" << rep.statistic << " joint=" << joint.back() << '\n';
  }
  const RateProbe probe = ks_rate_probe(ns, ks, se);
  const bool pass = probe.nonincreasing && probe.within_rate;
  return {{{"b", b},
           {"r", p.r},
           {"s", p.s},
           {"per_n", per_n},
           {"rate", to_json(probe)},
           {"table", table},
           {"pass", pass}},
          pass};
}

Outcome do_llt(const ExperimentConfig& c, std::ostream& out) {
  const TiltedParams p{c.r, c.s};
  require_admissible(p);
  const auto ns = or_default(c.n_list, {50, 400});
  json per_n = json::array(), table = json::array();
  std::vector<double> sup;
  bool cov_ok = true;
  std::uint64_t index = 0;
  for (int n : ns) {
    Rng rng = seed_stream(derive_seed(c.seed, index++), 0);
    const LLTReport rep = llt_check(p, n, c.n_reps, c.bins, rng);
    sup.push_back(rep.sup_err);
    cov_ok = cov_ok && rep.max_cov_z() <= 5.0;
    per_n.push_back(to_json(rep, c.format == OutputFormat::json));
    table.push_back({{"n", n}, {"sup_err", rep.sup_err}, {"max_cov_z", rep.max_cov_z()}});
    out << "n=" << n << " sup_err=" << rep.sup_err << " max_cov_z=" << rep.max_cov_z() << '\n';
  }
  const bool decreasing = strictly_decreasing(sup);
  const bool pass = cov_ok && decreasing;
  return {{{"r", p.r},
           {"s", p.s},
           {"per_n", per_n},
           {"table", table},
           {"checks", {{"covariance_within_5se", cov_ok}, {"sup_err_decreasing", decreasing}}},
           {"pass", pass}},
          pass};
}

Outcome do_sandwich(const ExperimentConfig& c, std::ostream& out) {
  const ShellSpec shell = ShellSpec::make(c.n, c.b, c.eps.value_or(0.05));
  const TiltedParams p = c.b <= 2.0 ? solve_params(c.b) : TiltedParams{0.0, 1.0};
  Rng rng = seed_stream(c.seed, 0);
  const auto reps = sandwich_check_all(shell, p, all_functionals(), c.n_reps, rng);
  json items = json::array(), table = json::array();
  bool pass = true;
  for (const auto& r : reps) {
    pass = pass && r.pass;
    items.push_back(to_json(r));
    table.push_back({{"functional", to_string(r.functional)}, {"lhs", r.lhs}, {"mid", r.mid},
                     {"rhs", r.rhs}, {"pass", r.pass}});
    out << to_string(r.functional) << ": " << r.lhs << " <= " << r.mid << " <= " << r.rhs
        << (r.pass ? " pass" : " FAIL") << '\n';
  }
  return {{{"n", c.n}, {"b", c.b}, {"eps", shell.eps}, {"r", p.r}, {"s", p.s},
           {"functionals", items}, {"table", table}, {"pass", pass}},
          pass};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::invalid_argument, "cannot write " + path.string());
  os << text;
}

std::string csv_cell(const json& v) {
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

}  // namespace

const char* to_string(Subcommand c) {
  switch (c) {
    case Subcommand::solve_params: return "solve-params";
    case Subcommand::sample: return "sample";
    case Subcommand::verify_thm1: return "verify-thm1";
    case Subcommand::verify_thm2: return "verify-thm2";
    case Subcommand::verify_thm3: return "verify-thm3";
    case Subcommand::llt_check: return "llt-check";
    case Subcommand::sandwich_check: return "sandwich-check";
  }
  return "?";
}

Subcommand subcommand_from_string(const std::string& name) {
  for (auto c : {Subcommand::solve_params, Subcommand::sample, Subcommand::verify_thm1,
                 Subcommand::verify_thm2, Subcommand::verify_thm3, Subcommand::llt_check,
                 Subcommand::sandwich_check}) {
    if (name == to_string(c)) return c;
  }
  throw Error(ErrorKind::invalid_argument, "unknown subcommand '" + name + "'");
}

void validate(const ExperimentConfig& c) {
  if (c.n_samples < 1) throw Error(ErrorKind::invalid_argument, "n_samples must be >= 1");
  if (c.threads < 1) throw Error(ErrorKind::invalid_argument, "threads must be >= 1");
  if (c.sweeps < 1) throw Error(ErrorKind::invalid_argument, "sweeps must be >= 1");
  if (c.burn_in < 0) throw Error(ErrorKind::invalid_argument, "burn-in must be >= 0");
  switch (c.subcommand) {
    case Subcommand::solve_params:
      if (!(c.b > 1.0) || !(c.b <= 2.0)) {
        throw Error(ErrorKind::out_of_range, "solve-params needs 1 < b <= 2");
      }
      break;
    case Subcommand::sample:
      require_b_range(c.n, c.b);
      if (c.sampler == SamplerId::shell) {
        if (!c.eps) throw Error(ErrorKind::invalid_argument, "the shell sampler needs --eps");
        ShellSpec::make(c.n, c.b, *c.eps);
      }
      if (c.sampler == SamplerId::gibbs && c.n < 3) {
        throw Error(ErrorKind::spec_invalid, "the gibbs sampler needs n >= 3");
      }
      break;
    case Subcommand::verify_thm1:
      for (double b : or_default(c.b_list, {1.2, 1.5, 2.0})) {
        if (!(b > 1.0) || !(b <= 2.0)) throw Error(ErrorKind::out_of_range, "verify-thm1 needs 1 < b <= 2");
        for (int n : or_default(c.n_list, {50, 100, 200, 400})) require_b_range(n, b);
      }
      break;
    case Subcommand::verify_thm2: {
      const double b = c.b_list.empty() ? (c.b > 2.0 ? c.b : 3.0) : c.b_list.front();
      if (!(b > 2.0)) throw Error(ErrorKind::out_of_range, "verify-thm2 needs b > 2");
      for (int n : or_default(c.n_list, {100, 400, 1600})) require_b_range(n, b);
      break;
    }
    case Subcommand::verify_thm3: {
      const double b = c.b_list.empty() ? c.b : c.b_list.front();
      if (!(b > 1.0) || !(b <= 2.0)) throw Error(ErrorKind::out_of_range, "verify-thm3 needs 1 < b <= 2");
      for (int n : or_default(c.n_list, {50, 100, 200, 400})) require_b_range(n, b);
      break;
    }
    case Subcommand::llt_check:
      require_admissible({c.r, c.s});
      if (c.n_reps < 10'000) throw Error(ErrorKind::invalid_argument, "llt-check needs n_reps >= 1e4");
      for (int n : or_default(c.n_list, {50, 400})) {
        if (n < 10) throw Error(ErrorKind::invalid_argument, "llt-check needs n >= 10");
      }
      break;
    case Subcommand::sandwich_check:
      require_b_range(c.n, c.b);
      ShellSpec::make(c.n, c.b, c.eps.value_or(0.05));
      if (c.n > 12) throw Error(ErrorKind::invalid_argument, "sandwich-check needs n <= 12");
      break;
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t state = seed ^ (0xD1B54A32D192ED03ULL * (index + 1));
  return splitmix64(state);
}

SampleBatch draw_batch(const ManifoldSpec& spec, SamplerId sampler, long long count,
                       std::uint64_t seed, int threads, int sweeps, int burn_in,
                       std::optional<double> eps) {
  switch (sampler) {
    case SamplerId::exact:
      return sample_parallel(count, seed, threads,
                             [&](long long k, Rng& rng) { return sample_exact(spec, k, rng); });
    case SamplerId::gibbs:
      return sample_parallel(count, seed, threads, [&](long long k, Rng& rng) {
        return sample_gibbs(spec, k, sweeps, burn_in, rng);
      });
    case SamplerId::shell: {
      if (!eps) throw Error(ErrorKind::invalid_argument, "the shell sampler needs eps");
      const ShellSpec shell = ShellSpec::make(spec.n, spec.b, *eps);
      const TiltedParams p = spec.b <= 2.0 ? solve_params(spec.b) : TiltedParams{0.0, 1.0};
      return sample_parallel(count, seed, threads,
                             [&](long long k, Rng& rng) { return sample_shell(shell, p, k, rng); });
    }
  }
  throw Error(ErrorKind::invalid_argument, "unknown sampler");
}

std::string table_to_csv(const json& rows) {
  std::ostringstream os;
  if (!rows.is_array() || rows.empty()) return "";
  std::vector<std::string> keys;
  for (const auto& [k, v] : rows.front().items()) keys.push_back(k);
  for (std::size_t i = 0; i < keys.size(); ++i) os << (i ? "," : "") << keys[i];
  os << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < keys.size(); ++i) {
      os << (i ? "," : "") << (row.contains(keys[i]) ? csv_cell(row[keys[i]]) : "");
    }
    os << '\n';
  }
  return os.str();
}

json table_from_csv(const std::string& text) {
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };
  json rows = json::array();
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) return rows;
  const auto keys = split(line);
  while (std::getline(is, line)) {
    const auto cells = split(line);
    if (cells.size() != keys.size()) {
      throw Error(ErrorKind::parse_error, "csv row has " + std::to_string(cells.size()) +
                                              " cells, header has " + std::to_string(keys.size()));
    }
    json row = json::object();
    for (std::size_t i = 0; i < keys.size(); ++i) {
      if (cells[i].empty()) continue;
      json v = json::parse(cells[i], nullptr, false);
      row[keys[i]] = v.is_discarded() || v.is_structured() ? json(cells[i]) : v;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

int run_checked(const ExperimentConfig& config, std::ostream& out, std::ostream& err) {
  try {
    validate(config);
  } catch (const Error& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }
  const auto start = std::chrono::steady_clock::now();
  std::filesystem::create_directories(config.out_dir);

  json outputs = json::array();
  bool pass = true;
  try {
    if (config.subcommand == Subcommand::sample) {
      const ManifoldSpec spec = ManifoldSpec::make(config.n, config.b);
      const SampleBatch batch = draw_batch(spec, config.sampler, config.n_samples, config.seed,
                                           config.threads, config.sweeps, config.burn_in, config.eps);
      write_batch(config.out_dir / "batch.txt", batch);
      outputs.push_back("batch.txt");
      out << "wrote " << batch.size() << " points (" << batch.proposals << " proposals) to "
          << (config.out_dir / "batch.txt").string() << '\n';
    } else {
      Outcome o;
      switch (config.subcommand) {
        case Subcommand::solve_params: o = do_solve_params(config, out); break;
        case Subcommand::verify_thm1: o = do_verify_thm1(config, out); break;
        case Subcommand::verify_thm2: o = do_verify_thm2(config, out); break;
        case Subcommand::verify_thm3: o = do_verify_thm3(config, out); break;
        case Subcommand::llt_check: o = do_llt(config, out); break;
        case Subcommand::sandwich_check: o = do_sandwich(config, out); break;
        case Subcommand::sample: break;
      }
      pass = o.pass;
      o.report["config"] = config_json(config);
      const std::string stem = to_string(config.subcommand);
      if (config.format == OutputFormat::json) {
        write_text(config.out_dir / (stem + ".json"), o.report.dump(2) + "\n");
        outputs.push_back(stem + ".json");
      } else {
        write_text(config.out_dir / (stem + ".csv"), table_to_csv(o.report["table"]));
        outputs.push_back(stem + ".csv");
      }
    }
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    const bool usage = e.kind() == ErrorKind::spec_invalid || e.kind() == ErrorKind::invalid_argument ||
                       e.kind() == ErrorKind::out_of_range || e.kind() == ErrorKind::conditioning;
    return usage ? kExitUsage : kExitCheckFailed;
  }

  json streams = json::array();
  if (is_sampling(config.subcommand)) {
    for (int w = 0; w < config.threads; ++w) {
      streams.push_back({{"worker", w}, {"derivation", "seed_stream(master_seed, worker)"},
                         {"state0", seed_stream(config.seed, w).state()[0]}});
    }
  }
  json manifest{{"tool", "ssphere"},
                {"version", kVersionString},
                {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                              "." + std::to_string(EIGEN_MINOR_VERSION)},
                {"compiler", __VERSION__},
                {"config", config_json(config)},
                {"worker_streams", streams},
                {"outputs", outputs},
                {"pass", pass},
                {"timing_file", "timing.json"}};
  write_text(config.out_dir / "manifest.json", manifest.dump(2) + "\n");
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_text(config.out_dir / "timing.json", json{{"wall_clock_seconds", seconds}}.dump(2) + "\n");
  if (!pass) err << "one or more checks failed; see the report in " << config.out_dir.string() << '\n';
  return pass ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run(const ExperimentConfig& config, std::ostream& out, std::ostream& err) {
  try {
    return run_checked(config, out, err);
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error (io): " << e.what() << '\n';
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
  }
  return kExitCheckFailed;
}

}  // namespace ssphere
