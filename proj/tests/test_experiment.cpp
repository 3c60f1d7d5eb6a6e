#include <cmath>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "agbp/error.hpp"
#include "agbp/experiment.hpp"
#include "support.hpp"

namespace agbp {
namespace {

FactorClassification counts(std::vector<std::size_t> lambda, std::vector<std::size_t> gamma) {
  FactorClassification c;
  c.cluster_count = lambda.size();
  c.internal_edges = std::move(lambda);
  c.tie_edges = std::move(gamma);
  return c;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

ExperimentConfig small_sweep() {
  ExperimentConfig c;
  c.scenarios = {{"sdd", test::small_sdd(0)}};
  c.nu_l_grid = {1, 5};
  c.repetitions = 3;
  c.base_seed = 40;
  return c;
}

TEST(Kappa, Examples) {
  EXPECT_NEAR(compute_kappa(counts({600, 600}, {5, 5})), 600.0 / 1210.0, 1e-15);
  EXPECT_NEAR(compute_kappa(counts({600, 600}, {5, 5})), 0.495868, 1e-6);
  EXPECT_EQ(compute_kappa(counts({900, 300}, {0, 0})), 0.75);
  std::string warning;
  EXPECT_EQ(compute_kappa(counts({40}, {0}), &warning), 1.0);
  EXPECT_FALSE(warning.empty());
  compute_kappa(counts({40, 30}, {2, 2}), &warning);
  EXPECT_TRUE(warning.empty());
  EXPECT_THROW(compute_kappa(counts({0, 0}, {0, 0})), ValidationError);
}

TEST(ScaleFactor, Examples) {
  EXPECT_EQ(compute_scale_factor(50, 10, 1, 9, 0.5), 0.0);
  EXPECT_EQ(compute_scale_factor(1000, 10, 1, 9, 0.5), 95.0);
  EXPECT_EQ(compute_scale_factor(100, 50, 2, 0, 0.5), 0.5);
  EXPECT_LT(compute_scale_factor(10, 10, 1, 9, 0.5), 0.0);
  EXPECT_THROW(compute_scale_factor(10, 0, 1, 9, 0.5), ValidationError);
}

TEST(LowerMedian, OrderStatistic) {
  EXPECT_TRUE(std::isnan(lower_median({})));
  EXPECT_EQ(lower_median({3.0}), 3.0);
  EXPECT_EQ(lower_median({4.0, 1.0}), 1.0);
  EXPECT_EQ(lower_median({5.0, 1.0, 3.0}), 3.0);
  EXPECT_EQ(lower_median({8.0, 2.0, 6.0, 4.0}), 4.0);
}

TEST(TrialSeed, PureFunction) {
  ExperimentConfig c = small_sweep();
  EXPECT_EQ(trial_seed(c, 0, 0), 40u);
  EXPECT_EQ(trial_seed(c, 0, 2), 42u);
  EXPECT_EQ(trial_seed(c, 2, 1), 40u + 2 * 3 + 1);
}

TEST(Sweep, RowsSummariesAndDeterminism) {
  const ExperimentConfig c = small_sweep();
  const SweepResult a = run_sweep(c);
  ASSERT_EQ(a.records.size(), c.scenarios.size() * c.nu_l_grid.size() * c.repetitions);
  ASSERT_EQ(a.summaries.size(), 2u);
  EXPECT_EQ(a.summaries[0].scenario, "sdd/g1/l1");
  EXPECT_EQ(a.summaries[1].scenario, "sdd/g1/l5");
  for (const MetricRecord& r : a.records) {
    EXPECT_TRUE(r.error.empty()) << r.error;
    EXPECT_TRUE(r.sync_converged);
    EXPECT_TRUE(r.agbp_converged);
    ASSERT_TRUE(r.phi.has_value());
    EXPECT_EQ(*r.phi, compute_scale_factor(r.nu, r.nu_s, r.nu_g, r.nu_l, r.kappa));
  }
  const SweepResult b = run_sweep(c);
  std::ostringstream ta, tb;
  write_trials_csv(ta, a.records);
  write_trials_csv(tb, b.records);
  EXPECT_EQ(ta.str(), tb.str());

  ExperimentConfig threaded = c;
  threaded.threads = 3;
  std::ostringstream tc;
  write_trials_csv(tc, run_sweep(threaded).records);
  EXPECT_EQ(ta.str(), tc.str());
}

TEST(Sweep, SingleRepetitionMediansAreTheValues) {
  ExperimentConfig c = small_sweep();
  c.repetitions = 1;
  c.nu_l_grid = {5};
  const SweepResult r = run_sweep(c);
  ASSERT_EQ(r.records.size(), 1u);
  ASSERT_EQ(r.summaries.size(), 1u);
  EXPECT_EQ(r.summaries[0].median_phi, *r.records[0].phi);
  EXPECT_EQ(r.summaries[0].median_nu, double(r.records[0].nu));
  EXPECT_EQ(r.summaries[0].median_nu_s, double(r.records[0].nu_s));
}

TEST(Sweep, CsvPhiIsRecomputableBitExactly) {
  ExperimentConfig c = small_sweep();
  c.nu_l_grid = {1, 5, 30};
  const auto dir = test::scratch_dir("sweep_csv");
  write_sweep(run_sweep(c), dir);
  std::ifstream in(dir / "trials.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "scenario,seed,nu,nu_s,nu_g,nu_l,kappa,phi,sync_converged,agbp_converged,rmse_sync,rmse_agbp");
  std::size_t rows = 0, checked = 0;
  while (std::getline(in, line)) {
    ++rows;
    const auto f = split(line);
    ASSERT_EQ(f.size(), 12u) << line;
    if (f[7].empty()) continue;
    const double phi = compute_scale_factor(std::stoull(f[2]), std::stoull(f[3]), std::stoull(f[4]),
                                            std::stoull(f[5]), std::stod(f[6]));
    EXPECT_EQ(std::stod(f[7]), phi) << line;
    ++checked;
  }
  EXPECT_EQ(rows, 9u);
  EXPECT_EQ(checked, 9u);

  std::ifstream summary(dir / "summary.csv");
  std::getline(summary, line);
  EXPECT_NE(line.find("lower median"), std::string::npos);
  std::size_t summary_rows = 0;
  std::getline(summary, line);
  while (std::getline(summary, line)) ++summary_rows;
  EXPECT_EQ(summary_rows, 3u);
  EXPECT_TRUE(std::filesystem::exists(dir / "failures.csv"));
}

TEST(Sweep, TrialFailureIsRecordedNotFatal) {
  ExperimentConfig c = small_sweep();
  c.nu_l_grid = {1};
  c.repetitions = 2;
  c.max_iterations = 2;  // synchronous runs cannot converge
  c.max_sequences = 1;
  const SweepResult r = run_sweep(c);
  ASSERT_EQ(r.records.size(), 2u);
  for (const MetricRecord& m : r.records) {
    EXPECT_FALSE(m.sync_converged);
    EXPECT_FALSE(m.phi.has_value());
  }
  EXPECT_EQ(r.summaries[0].phi_count, 0u);
  EXPECT_EQ(r.summaries[0].sync_convergence, 0.0);
}

TEST(ExperimentConfig, Validation) {
  ExperimentConfig c = small_sweep();
  c.repetitions = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = small_sweep();
  c.scenarios.clear();
  EXPECT_THROW(c.validate(), ValidationError);
  c = small_sweep();
  c.nu_g_grid = {0};
  EXPECT_THROW(run_sweep(c), ValidationError);
}

}  // namespace
}  // namespace agbp
