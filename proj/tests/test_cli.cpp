#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "support.hpp"

namespace agbp {
namespace {

namespace fs = std::filesystem;

struct Invocation {
  int code = 0;
  std::string out;
  std::string err;
};

Invocation invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "agbp");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::cli_main(int(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const fs::path& dir, const std::string& body) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << body;
  return p;
}

constexpr const char* kSdd = R"({
  "generator": {"cluster_count": 2, "rows_per_cluster": 20, "expected_internal_edges": 120,
                "expected_tie_edges": 5, "kind": "symmetric", "diagonal_increment": 0.01},
  "schedule": {"kind": "alternating", "nu_g": 1, "nu_l": 5},
  "experiment": {"repetitions": 2, "nu_l": [1, 5]},
  "dynamic": {"perturbations": 2, "p_z": 0.1}
})";

TEST(Cli, SweepIsByteIdentical) {
  const fs::path dir = test::scratch_dir("cli_sweep");
  const fs::path cfg = write_config(dir, kSdd);
  const auto a = invoke({"sweep", "--config", cfg.string(), "--seed", "42", "--out", (dir / "a").string(), "--quiet"});
  ASSERT_EQ(a.code, 0) << a.err;
  const auto b = invoke({"sweep", "--config", cfg.string(), "--seed", "42", "--out", (dir / "b").string(), "--quiet"});
  ASSERT_EQ(b.code, 0) << b.err;
  for (const char* name : {"trials.csv", "summary.csv", "failures.csv"}) {
    const std::string ta = slurp(dir / "a" / name);
    EXPECT_FALSE(ta.empty()) << name;
    EXPECT_EQ(ta, slurp(dir / "b" / name)) << name;
  }
  const auto j = nlohmann::json::parse(a.out);
  EXPECT_EQ(j.at("summary").size(), 2u);
}

TEST(Cli, AnalyzeReportsContraction) {
  const fs::path dir = test::scratch_dir("cli_analyze");
  const auto r = invoke({"analyze", "--config", write_config(dir, kSdd).string(), "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_LT(j.at("rho").get<double>(), 1.0);
  EXPECT_TRUE(j.at("converges_predicted").get<bool>());
  EXPECT_LT(j.at("fixed_point_rmse_vs_wls").get<double>(), 1e-8);
}

TEST(Cli, GenerateThenRunFromFiles) {
  const fs::path dir = test::scratch_dir("cli_files");
  const auto g = invoke({"generate", "--config", write_config(dir, kSdd).string(), "--out", (dir / "model").string()});
  ASSERT_EQ(g.code, 0) << g.err;
  for (const char* f : {"H.mtx", "z.csv", "partition.csv", "generator.json"}) {
    EXPECT_TRUE(fs::exists(dir / "model" / f)) << f;
  }
  const fs::path cfg2 = dir / "files.json";
  std::ofstream(cfg2) << R"({"model": {"matrix": "model/H.mtx", "observations": "model/z.csv",
                                       "partition": "model/partition.csv"},
                             "schedule": {"kind": "synchronous"}})";
  const auto r = invoke({"run", "--config", cfg2.string(), "--out", (dir / "run").string(), "--tol", "1e-7"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j.at("converged").get<bool>());
  EXPECT_LE(j.at("rmse_final").get<double>(), 1e-7);
  EXPECT_TRUE(fs::exists(dir / "run" / "run.json"));
  EXPECT_EQ(slurp(dir / "run" / "estimate.csv").rfind("variable,mean,variance\n", 0), 0u);
}

TEST(Cli, DynamicWritesIntervals) {
  const fs::path dir = test::scratch_dir("cli_dynamic");
  const auto r = invoke({"dynamic", "--config", write_config(dir, kSdd).string(), "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  ASSERT_EQ(j.size(), 3u);
  for (const auto& row : j) EXPECT_TRUE(row.at("converged").get<bool>());
  EXPECT_TRUE(fs::exists(dir / "dynamic.csv"));
}

TEST(Cli, MissingConfigExitsOneWithPath) {
  const fs::path missing = test::scratch_dir("cli_missing") / "absent.json";
  const auto r = invoke({"run", "--config", missing.string()});
  EXPECT_EQ(r.code, cli::kExitConfig);
  EXPECT_NE(r.err.find(missing.string()), std::string::npos) << r.err;
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(invoke({"frobnicate", "--config", "x.json"}).code, cli::kExitConfig);
  EXPECT_EQ(invoke({}).code, cli::kExitConfig);
  EXPECT_EQ(invoke({"run"}).code, cli::kExitConfig);
  EXPECT_EQ(invoke({"run", "--config", "x.json", "--bogus"}).code, cli::kExitConfig);
  const fs::path dir = test::scratch_dir("cli_badtol");
  EXPECT_EQ(invoke({"run", "--config", write_config(dir, kSdd).string(), "--tol", "-1"}).code, cli::kExitConfig);
  std::ofstream(dir / "bad.json") << R"({"schedule": {"nu_x": 1}})";
  const auto bad = invoke({"run", "--config", (dir / "bad.json").string()});
  EXPECT_EQ(bad.code, cli::kExitConfig);
  EXPECT_NE(bad.err.find("nu_x"), std::string::npos) << bad.err;
}

TEST(Cli, RuntimeFailureExitsTwo) {
  const fs::path dir = test::scratch_dir("cli_runtime");
  std::ofstream(dir / "blocker") << "x";
  const auto r = invoke({"sweep", "--config", write_config(dir, kSdd).string(), "--out", (dir / "blocker").string(), "--quiet"});
  EXPECT_EQ(r.code, cli::kExitRuntime) << r.err;
}

TEST(Cli, HelpExitsZero) {
  const auto r = invoke({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("sweep"), std::string::npos);
}

}  // namespace
}  // namespace agbp
