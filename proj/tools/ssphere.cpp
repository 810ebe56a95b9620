// ssphere: sampling and verification driver for the simplex-sphere intersection.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>

#include "ssphere/experiment.hpp"

int main(int argc, char** argv) {
  using namespace ssphere;
  ExperimentConfig config;
  CLI::App app{"Uniform sampling on {x > 0 : sum x = n, sum x^2 = n b} and its verification harness"};
  app.require_subcommand(1);
  app.fallthrough();

  double eps = 0.0;
  std::string sampler = "exact";
  std::string format = "json";
  std::string out_dir;
  app.add_option("--n", config.n, "dimension")->capture_default_str();
  app.add_option("--b", config.b, "normalized second moment")->capture_default_str();
  auto* eps_opt = app.add_option("--eps", eps, "shell thickness (shell sampler, sandwich-check)");
  auto* sampler_opt = app.add_option("--sampler", sampler,
                                     "exact | shell | gibbs (verify-thm1/3 default to gibbs)")
      ->check(CLI::IsMember({"exact", "shell", "gibbs"}))
      ->capture_default_str();
  app.add_option("--n-samples", config.n_samples, "points per batch")->capture_default_str();
  app.add_option("--seed", config.seed, "master seed")->capture_default_str();
  app.add_option("--threads", config.threads, "worker count")->capture_default_str();
  app.add_option("--out-dir", out_dir, "output directory (default: $SSPHERE_OUT_DIR or ssphere-out)");
  app.add_option("--format", format, "report format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  app.add_option("--sweeps", config.sweeps, "gibbs sweeps between recorded points")->capture_default_str();
  app.add_option("--burn-in", config.burn_in, "gibbs burn-in sweeps")->capture_default_str();
  app.add_option("--n-list", config.n_list, "dimensions for verification sweeps")->delimiter(',');
  app.add_option("--b-list", config.b_list, "b values for verification sweeps")->delimiter(',');
  app.add_option("--r", config.r, "llt-check: r")->capture_default_str();
  app.add_option("--s", config.s, "llt-check: s")->capture_default_str();
  app.add_option("--n-reps", config.n_reps, "llt-check / sandwich-check replications")->capture_default_str();
  app.add_option("--bins", config.bins, "llt-check histogram bins per axis")->capture_default_str();

  for (const char* name : {"solve-params", "sample", "verify-thm1", "verify-thm2", "verify-thm3",
                           "llt-check", "sandwich-check"}) {
    app.add_subcommand(name)->callback([&config, name] { config.subcommand = subcommand_from_string(name); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*eps_opt) config.eps = eps;
  config.sampler = sampler_from_string(sampler);
  if (!*sampler_opt && (config.subcommand == Subcommand::verify_thm1 ||
                        config.subcommand == Subcommand::verify_thm3)) {
    config.sampler = SamplerId::gibbs;
  }
  config.format = format == "csv" ? OutputFormat::csv : OutputFormat::json;
  if (!out_dir.empty()) {
    config.out_dir = out_dir;
  } else if (const char* env = std::getenv("SSPHERE_OUT_DIR"); env && *env) {
    config.out_dir = env;
  }
  return run(config, std::cout, std::cerr);
}
