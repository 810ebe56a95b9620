#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssphere/samplers.hpp"

namespace ssphere {

enum class Subcommand { solve_params, sample, verify_thm1, verify_thm2, verify_thm3, llt_check, sandwich_check };
enum class OutputFormat { csv, json };

const char* to_string(Subcommand c);
Subcommand subcommand_from_string(const std::string& name);

/// Exit codes of run().
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

inline constexpr const char* kVersionString = "1.0.0";

struct ExperimentConfig {
  Subcommand subcommand = Subcommand::sample;
  int n = 20;
  double b = 1.5;
  std::optional<double> eps;
  SamplerId sampler = SamplerId::exact;
  long long n_samples = 1000;
  std::uint64_t seed = 1;
  int threads = 1;
  std::filesystem::path out_dir = "ssphere-out";
  OutputFormat format = OutputFormat::json;

  // Gibbs chain controls.
  int sweeps = 10;
  int burn_in = 1000;
  // Verification sweeps; empty means the subcommand's default list.
  std::vector<int> n_list;
  std::vector<double> b_list;
  // llt-check parameters and replication counts.
  double r = 0.0;
  double s = 1.0;
  long long n_reps = 100'000;
  int bins = 25;
};

/// Throws Error (spec_invalid / invalid_argument / out_of_range) when the
/// config cannot run; run() maps that to exit code 2.
void validate(const ExperimentConfig& config);

/// Sub-seed for the index-th batch of one experiment.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Draws `count` points with the configured sampler, split across workers.
SampleBatch draw_batch(const ManifoldSpec& spec, SamplerId sampler, long long count,
                       std::uint64_t seed, int threads, int sweeps, int burn_in,
                       std::optional<double> eps = std::nullopt);

/// Executes one subcommand, writing its artifacts into out_dir:
///   sample:      batch.txt
///   otherwise:   <subcommand>.json or <subcommand>.csv
///   always:      manifest.json (config, versions, per-worker streams, outputs)
///                timing.json (wall-clock; the only nondeterministic file)
/// Returns 0 on success, 1 on a failed check or infeasible sampler, 2 on usage error.
int run(const ExperimentConfig& config, std::ostream& out, std::ostream& err);

/// Flat table of a report's "table" rows as CSV (header from the first row's keys).
std::string table_to_csv(const nlohmann::json& rows);

/// Inverse of table_to_csv: cells that parse as JSON scalars become numbers or
/// booleans, everything else stays a string.
nlohmann::json table_from_csv(const std::string& text);

}  // namespace ssphere
