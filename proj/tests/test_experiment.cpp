#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "ssphere/batch_io.hpp"
#include "ssphere/experiment.hpp"

using namespace ssphere;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ssphere_experiment_tests" / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::map<std::string, std::string> artifacts(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().filename() == "timing.json") continue;
    out[e.path().filename().string()] = slurp(e.path());
  }
  return out;
}

struct RunResult {
  int code;
  std::string out, err;
};

RunResult run_capture(const ExperimentConfig& c) {
  std::ostringstream out, err;
  const int code = run(c, out, err);
  return {code, out.str(), err.str()};
}

// Small configurations of every subcommand.
std::vector<ExperimentConfig> small_configs() {
  std::vector<ExperimentConfig> cs;
  ExperimentConfig c;
  c.subcommand = Subcommand::solve_params;
  c.b = 1.5;
  cs.push_back(c);

  c = {};
  c.subcommand = Subcommand::sample;
  c.n = 12;
  c.b = 1.7;
  c.n_samples = 50;
  cs.push_back(c);
  c.sampler = SamplerId::gibbs;
  c.burn_in = 20;
  c.sweeps = 2;
  cs.push_back(c);
  c.sampler = SamplerId::shell;
  c.n = 6;
  c.eps = 0.1;
  cs.push_back(c);

  c = {};
  c.subcommand = Subcommand::verify_thm1;
  c.n_list = {10, 12};
  c.b_list = {1.5};
  c.n_samples = 200;
  cs.push_back(c);

  c = {};
  c.subcommand = Subcommand::verify_thm2;
  c.n_list = {20, 40};
  c.n_samples = 30;
  c.burn_in = 20;
  c.sweeps = 2;
  cs.push_back(c);

  c = {};
  c.subcommand = Subcommand::verify_thm3;
  c.n_list = {10, 12};
  c.n_samples = 200;
  c.sampler = SamplerId::gibbs;
  c.burn_in = 20;
  c.sweeps = 2;
  cs.push_back(c);

  c = {};
  c.subcommand = Subcommand::llt_check;
  c.n_list = {10, 20};
  c.n_reps = 10'000;
  c.bins = 5;
  cs.push_back(c);

  c = {};
  c.subcommand = Subcommand::sandwich_check;
  c.n = 6;
  c.b = 1.5;
  c.eps = 0.1;
  c.n_reps = 100;
  cs.push_back(c);
  return cs;
}

}  // namespace

TEST(Subcommand, Names) {
  for (auto c : {Subcommand::solve_params, Subcommand::sample, Subcommand::verify_thm1,
                 Subcommand::verify_thm2, Subcommand::verify_thm3, Subcommand::llt_check,
                 Subcommand::sandwich_check})
    EXPECT_EQ(subcommand_from_string(to_string(c)), c);
  EXPECT_THROW(subcommand_from_string("verify-thm4"), Error);
}

TEST(Run, SolveParamsAtPhaseBoundary) {
  ExperimentConfig c;
  c.subcommand = Subcommand::solve_params;
  c.b = 2.0;
  c.out_dir = scratch("solve");
  const auto r = run_capture(c);
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_EQ(r.out, "r=0 s=1\n");
  const auto report = nlohmann::json::parse(slurp(c.out_dir / "solve-params.json"));
  EXPECT_NEAR(report["r"].get<double>(), 0.0, 1e-6);
  EXPECT_NEAR(report["s"].get<double>(), 1.0, 1e-6);
  EXPECT_TRUE(fs::exists(c.out_dir / "manifest.json"));
  EXPECT_TRUE(fs::exists(c.out_dir / "timing.json"));
}

TEST(Run, EmptyManifoldIsUsageError) {
  ExperimentConfig c;
  c.subcommand = Subcommand::sample;
  c.n = 3;
  c.b = 3.0;
  c.out_dir = scratch("empty");
  const auto r = run_capture(c);
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("1 < b < n"), std::string::npos) << r.err;
}

TEST(Run, UsageErrors) {
  ExperimentConfig c;
  c.out_dir = scratch("usage");
  c.threads = 0;
  EXPECT_EQ(run_capture(c).code, kExitUsage);
  c = {};
  c.out_dir = scratch("usage");
  c.n_samples = 0;
  EXPECT_EQ(run_capture(c).code, kExitUsage);
  c = {};
  c.out_dir = scratch("usage");
  c.subcommand = Subcommand::solve_params;
  c.b = 2.5;
  EXPECT_EQ(run_capture(c).code, kExitUsage);
  c.b = 1.00001;
  EXPECT_EQ(run_capture(c).code, kExitUsage);
  c = {};
  c.out_dir = scratch("usage");
  c.subcommand = Subcommand::sample;
  c.sampler = SamplerId::shell;
  EXPECT_EQ(run_capture(c).code, kExitUsage);
  c = {};
  c.out_dir = scratch("usage");
  c.subcommand = Subcommand::sandwich_check;
  c.n = 20;
  EXPECT_EQ(run_capture(c).code, kExitUsage);
}

TEST(Run, InfeasibleExactSamplerExitsOne) {
  ExperimentConfig c;
  c.subcommand = Subcommand::sample;
  c.n = 400;
  c.b = 1.5;
  c.n_samples = 1;
  c.out_dir = scratch("infeasible");
  const auto r = run_capture(c);
  EXPECT_EQ(r.code, kExitCheckFailed);
  EXPECT_NE(r.err.find("gibbs"), std::string::npos) << r.err;
}

TEST(Run, UnwritableOutDirExitsOne) {
  const auto file = scratch("not_a_dir");
  fs::create_directories(file.parent_path());
  std::ofstream(file) << "x";
  ExperimentConfig c;
  c.subcommand = Subcommand::solve_params;
  c.out_dir = file / "sub";
  const auto r = run_capture(c);
  EXPECT_EQ(r.code, kExitCheckFailed);
  EXPECT_NE(r.err.find("error"), std::string::npos);
}

TEST(Run, SampleWritesVerifiedBatch) {
  ExperimentConfig c;
  c.subcommand = Subcommand::sample;
  c.n = 12;
  c.b = 1.7;
  c.n_samples = 40;
  c.seed = 5;
  c.out_dir = scratch("sample");
  ASSERT_EQ(run_capture(c).code, kExitOk);
  const auto batch = read_batch(c.out_dir / "batch.txt");
  EXPECT_EQ(batch.size(), 40);
  EXPECT_EQ(batch.seed, 5u);
  std::ostringstream os;
  write_batch(os, batch);
  EXPECT_EQ(os.str(), slurp(c.out_dir / "batch.txt"));
}

TEST(Run, EveryArtifactRoundTrips) {
  int k = 0;
  for (auto c : small_configs()) {
    for (auto format : {OutputFormat::json, OutputFormat::csv}) {
      c.format = format;
      c.out_dir = scratch("roundtrip" + std::to_string(k++));
      const auto r = run_capture(c);
      ASSERT_TRUE(r.code == kExitOk || r.code == kExitCheckFailed) << to_string(c.subcommand) << r.err;
      for (const auto& e : fs::directory_iterator(c.out_dir)) {
        const std::string text = slurp(e.path());
        const auto ext = e.path().extension();
        if (ext == ".json") {
          EXPECT_EQ(nlohmann::json::parse(text).dump(2) + "\n", text) << e.path();
        } else if (ext == ".csv") {
          EXPECT_EQ(table_to_csv(table_from_csv(text)), text) << e.path();
        } else {
          std::istringstream is(text);
          std::ostringstream os;
          write_batch(os, read_batch(is));
          EXPECT_EQ(os.str(), text) << e.path();
        }
      }
    }
  }
}

TEST(Run, RepeatedRunsAreByteIdentical) {
  int k = 0;
  for (auto c : small_configs()) {
    for (int threads : {1, 2}) {
      c.threads = threads;
      c.out_dir = scratch("repeat_a" + std::to_string(k));
      const int first = run_capture(c).code;
      const auto a = artifacts(c.out_dir);
      c.out_dir = scratch("repeat_b" + std::to_string(k++));
      EXPECT_EQ(run_capture(c).code, first);
      auto b = artifacts(c.out_dir);
      ASSERT_EQ(a.size(), b.size());
      for (const auto& [name, text] : a) {
        if (name == "manifest.json") {
          // out_dir is recorded in the manifest and reports; compare the rest.
          auto ja = nlohmann::json::parse(text), jb = nlohmann::json::parse(b[name]);
          ja["config"].erase("out_dir");
          jb["config"].erase("out_dir");
          EXPECT_EQ(ja, jb) << to_string(c.subcommand);
        } else if (name.ends_with(".json")) {
          auto ja = nlohmann::json::parse(text), jb = nlohmann::json::parse(b[name]);
          ja["config"].erase("out_dir");
          jb["config"].erase("out_dir");
          EXPECT_EQ(ja.dump(), jb.dump()) << to_string(c.subcommand);
        } else {
          EXPECT_EQ(text, b[name]) << to_string(c.subcommand) << " " << name;
        }
      }
    }
  }
}

TEST(DeriveSeed, DistinctAndStable) {
  EXPECT_EQ(derive_seed(1, 0), derive_seed(1, 0));
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
}

TEST(TableCsv, RoundTrip) {
  const auto rows = nlohmann::json::array({{{"a", 1.5}, {"b", "x"}, {"c", true}, {"d", 3}},
                                           {{"a", 1e-300}, {"b", "y"}, {"c", false}, {"d", -2}}});
  const std::string csv = table_to_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "a,b,c,d");
  EXPECT_EQ(table_from_csv(csv), rows);
  EXPECT_THROW(table_from_csv("a,b\n1\n"), Error);
}
