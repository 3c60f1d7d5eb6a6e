#include <cmath>

#include <gtest/gtest.h>

#include "agbp/analysis.hpp"
#include "agbp/error.hpp"
#include "agbp/scheduler.hpp"
#include "support.hpp"

namespace agbp {
namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

TEST(Rmse, ClosedForm) {
  const std::vector<double> a{1.0, -2.0, 4.0};
  EXPECT_EQ(rmse(a, a), 0.0);
  EXPECT_NEAR(rmse({0.0, 0.0}, {3.0, 4.0}), std::sqrt(12.5), 1e-15);
  EXPECT_NEAR(rmse({0.0, 0.0}, {3.0, 4.0}), 3.5355, 1e-4);
  const std::vector<double> b{0.5, 3.0, -1.0};
  std::vector<double> ka, kb;
  for (std::size_t i = 0; i < 3; ++i) {
    ka.push_back(-3.0 * a[i]);
    kb.push_back(-3.0 * b[i]);
  }
  EXPECT_NEAR(rmse(ka, kb), 3.0 * rmse(a, b), 1e-12);
  EXPECT_THROW(rmse({1.0}, {1.0, 2.0}), ValidationError);
}

TEST(Schedule, Validation) {
  EXPECT_THROW(Schedule::alternating(0, 5).validate(), ValidationError);
  EXPECT_NO_THROW(Schedule::alternating(1, 0).validate());
  EXPECT_NO_THROW(Schedule::synchronous().validate());
  RunConfig rc;
  rc.tolerance = -1.0;
  EXPECT_THROW(rc.validate(), ValidationError);
}

TEST(RunSynchronous, LeafOnlyConvergesAtFirstIteration) {
  Eigen::MatrixXd h = Eigen::Vector3d(2.0, 1.0, -1.0).asDiagonal();
  const LinearModel model = test::dense_model(h, {4.0, 1.0, 3.0}, {1.0, 1.0, 1.0});
  const auto g = build_factor_graph(model);
  RunConfig rc;
  rc.oracle = wls_solve(model);
  const RunResult r = run_synchronous(g, rc);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.nu, 1u);
  EXPECT_DOUBLE_EQ(r.estimate[0], 2.0);
  EXPECT_DOUBLE_EQ(r.estimate[1], 1.0);
  EXPECT_DOUBLE_EQ(r.estimate[2], -3.0);
}

TEST(RunSynchronous, SddConvergesToWls) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto gen = generate_model(test::small_sdd(seed));
    const auto g = build_factor_graph(gen.model);
    RunConfig rc;
    rc.oracle = wls_solve(gen.model);
    const RunResult r = run_synchronous(g, rc);
    EXPECT_TRUE(r.converged);
    EXPECT_FALSE(r.diverged);
    EXPECT_LE(r.final_rmse(), 1e-5);
    EXPECT_EQ(r.rmse_history.size(), r.nu);
    EXPECT_EQ(r.residual_history.size(), r.nu);
  }
}

TEST(RunSynchronous, SpectralRadiusAboveOneDiverges) {
  // Search a family of loopy toys for instances the analysis says diverge.
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 400 && checked < 3; ++seed) {
    const LinearModel model = test::loopy_model(10, 10, 7, 10.0, seed);
    FactorGraph g;
    try {
      g = build_factor_graph(model);
    } catch (const ValidationError&) {
      continue;
    }
    const double rho = spectral_radius(decompose(g).omega);
    if (rho < 1.2) continue;
    RunConfig rc;
    rc.oracle = wls_solve(model);
    rc.max_iterations = 5000;
    const RunResult r = run_synchronous(g, rc);
    EXPECT_FALSE(r.converged) << "seed " << seed << " rho " << rho;
    EXPECT_TRUE(r.diverged) << "seed " << seed << " rho " << rho;
    ++checked;
  }
  EXPECT_EQ(checked, 3);
}

TEST(RunSynchronous, CheckpointsAreRecomputable) {
  const auto gen = generate_model(test::small_sdd(3));
  const auto g = build_factor_graph(gen.model);
  RunConfig rc;
  rc.oracle = wls_solve(gen.model);
  rc.max_iterations = 7;
  const RunResult r = run_synchronous(g, rc);
  ASSERT_EQ(r.nu, 7u);
  MessageState s = init_messages(g);
  std::vector<double> last = compute_marginals(g, s).mean;
  for (std::size_t k = 0; k < 7; ++k) {
    s = global_iteration(g, s);
    const auto now = compute_marginals(g, s).mean;
    EXPECT_EQ(r.rmse_history[k], rmse(now, *rc.oracle));
    EXPECT_EQ(r.residual_history[k], max_abs_diff(now, last));
    last = now;
  }
  EXPECT_EQ(r.estimate, last);
}

TEST(RunSynchronous, BookkeepingBounds) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto gen = generate_model(test::small_sdd(seed));
    const auto g = build_factor_graph(gen.model);
    const auto cls = classify_factors(g, gen.partition, gen.row_home);
    RunConfig rc;
    rc.oracle = wls_solve(gen.model);
    rc.tolerance = 1e-14;
    rc.max_iterations = 10;
    rc.max_sequences = 3;
    const RunResult s = run_synchronous(g, rc);
    EXPECT_LE(s.nu, 10u);
    EXPECT_FALSE(s.converged && s.diverged);
    const RunResult a = run_alternating(g, cls, Schedule::alternating(2, 3), rc);
    EXPECT_LE(a.nu_s, 3u);
    EXPECT_EQ(a.nu, a.nu_s * 5);
    EXPECT_FALSE(a.converged && a.diverged);
  }
}

TEST(RunAlternating, WithoutTiesMatchesSynchronousTrajectory) {
  GeneratorSpec spec = test::small_sdd(4);
  spec.expected_tie_edges = 0.0;
  const auto gen = generate_model(spec);
  const auto g = build_factor_graph(gen.model);
  const auto cls = classify_factors(g, gen.partition, gen.row_home);
  ASSERT_EQ(cls.tie_count(), 0u);
  RunConfig rc;
  rc.oracle = wls_solve(gen.model);
  rc.tolerance = 1e-300;
  rc.max_sequences = 6;
  const RunResult a = run_alternating(g, cls, Schedule::alternating(1, 4), rc);
  rc.max_iterations = a.nu;
  const RunResult s = run_synchronous(g, rc);
  EXPECT_EQ(a.nu, 30u);
  EXPECT_EQ(s.nu, a.nu);
  EXPECT_EQ(a.estimate, s.estimate);
  EXPECT_EQ(a.residual_history, s.residual_history);
}

TEST(RunAlternating, NoLocalIterationsCountsLikeSynchronous) {
  for (bool oracle : {true, false}) {
    const auto gen = generate_model(test::small_sdd(5));
    const auto g = build_factor_graph(gen.model);
    const auto cls = classify_factors(g, gen.partition, gen.row_home);
    RunConfig rc;
    if (oracle) rc.oracle = wls_solve(gen.model);
    const RunResult s = run_synchronous(g, rc);
    const RunResult a = run_alternating(g, cls, Schedule::alternating(1, 0), rc);
    ASSERT_TRUE(s.converged);
    ASSERT_TRUE(a.converged);
    EXPECT_EQ(a.nu_s * a.nu_g, s.nu);
    EXPECT_EQ(a.estimate, s.estimate);
  }
}

TEST(RunAlternating, FixedPointEqualsSynchronous) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto gen = generate_model(test::small_sdd(seed));
    const auto g = build_factor_graph(gen.model);
    const auto cls = classify_factors(g, gen.partition, gen.row_home);
    RunConfig rc;
    rc.tolerance = 1e-11;
    const RunResult s = run_synchronous(g, rc);
    for (SequenceOrder order : {SequenceOrder::global_first, SequenceOrder::local_first}) {
      const RunResult a = run_alternating(g, cls, Schedule::alternating(1, 30, order), rc);
      ASSERT_TRUE(s.converged && a.converged);
      EXPECT_LE(max_abs_diff(a.estimate, s.estimate), 1e-8) << "seed " << seed;
    }
  }
}

TEST(RunAlternating, WarmStartAtFixedPointNeedsNoSequence) {
  const auto gen = generate_model(test::small_sdd(6));
  const auto g = build_factor_graph(gen.model);
  const auto cls = classify_factors(g, gen.partition, gen.row_home);
  RunConfig rc;
  rc.oracle = wls_solve(gen.model);
  MessageState state = init_messages(g);
  ASSERT_TRUE(run_alternating(g, cls, Schedule::alternating(1, 5), state, rc).converged);
  rc.check_initial = true;
  const RunResult again = run_alternating(g, cls, Schedule::alternating(1, 5), state, rc);
  EXPECT_TRUE(again.converged);
  EXPECT_EQ(again.nu_s, 0u);
  EXPECT_EQ(again.nu, 0u);
}

TEST(RunSummary, Fields) {
  RunResult r;
  r.converged = true;
  r.nu = 12;
  r.nu_s = 3;
  r.rmse_history = {0.5, 1e-6};
  const auto j = run_summary_json(r, Schedule::alternating(1, 3), 9);
  EXPECT_EQ(j.at("nu"), 12);
  EXPECT_EQ(j.at("nu_s"), 3);
  EXPECT_EQ(j.at("seed"), 9);
  EXPECT_EQ(j.at("converged"), true);
  EXPECT_DOUBLE_EQ(j.at("rmse_final").get<double>(), 1e-6);
}

}  // namespace
}  // namespace agbp
