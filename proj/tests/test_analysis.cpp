#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "agbp/analysis.hpp"
#include "agbp/engine.hpp"
#include "agbp/error.hpp"
#include "agbp/scheduler.hpp"
#include "support.hpp"

namespace agbp {
namespace {

using test::dense_model;

/// Engine mean step at v*: the branch f2x means after one iteration that
/// starts from means `m` (branch layout) and variances v*.
Eigen::VectorXd engine_step(const FactorGraph& g, const VarianceFixedPoint& v, const Eigen::VectorXd& m,
                            const FreezeView* view = nullptr) {
  MessageState s = init_messages(g);
  const auto& branch = g.branch_edges();
  for (std::size_t e = 0; e < g.edge_count(); ++e) s.f2x_variance[e] = v.f2x[e];
  for (std::size_t q = 0; q < branch.size(); ++q) s.f2x_mean[branch[q]] = m[Eigen::Index(q)];
  MessageState out;
  iterate(g, view, s, out, nullptr);
  Eigen::VectorXd r(Eigen::Index(branch.size()));
  for (std::size_t q = 0; q < branch.size(); ++q) r[Eigen::Index(q)] = out.f2x_mean[branch[q]];
  return r;
}

/// Single-cluster-friendly 6-variable, 2-cluster instance with one tie row.
struct SixVariable {
  SixVariable() {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(11, 6);
    for (int j = 0; j < 6; ++j) h(j, j) = 1.0 + 0.1 * j;
    h.row(6) << 1, 0.5, 1, 0, 0, 0;
    h.row(7) << 0, 1, -0.7, 0, 0, 0;
    h.row(8) << 0, 0, 0, 1, 0.4, -0.6;
    h.row(9) << 0, 0, 0, 0.3, 1, 1;
    h.row(10) << 0, 0, 0.8, 1, 0, 0;  // tie between x2 (c0) and x3 (c1)
    std::vector<double> z{0.5, 1, -1, 2, 0.3, 0.7, 1.5, -0.2, 0.9, 1.1, 0.4};
    std::vector<double> v{2, 1, 3, 1, 2, 1, 0.5, 0.5, 0.5, 0.5, 0.5};
    model = dense_model(h, z, v);
    graph = build_factor_graph(model);
    classification = classify_factors(graph, ClusterPartition(2, {0, 0, 0, 1, 1, 1}));
  }
  LinearModel model;
  FactorGraph graph;
  FactorClassification classification;
};

TEST(Wls, ClosedForms) {
  const LinearModel identity = dense_model(Eigen::MatrixXd::Identity(3, 3), {1.5, -2, 7}, {1, 2, 3});
  const auto x = wls_solve(identity);
  EXPECT_NEAR(x[0], 1.5, 1e-15);
  EXPECT_NEAR(x[1], -2.0, 1e-15);
  EXPECT_NEAR(x[2], 7.0, 1e-15);
  Eigen::MatrixXd h(2, 1);
  h << 1, 1;
  EXPECT_NEAR(wls_solve(dense_model(h, {1, 3}, {1, 1}))[0], 2.0, 1e-15);
  EXPECT_NEAR(wls_solve(dense_model(h, {1, 3}, {1, 1.0 / 3.0}))[0], 2.5, 1e-15);
}

TEST(Wls, RankDeficientRejected) {
  Eigen::MatrixXd h(2, 2);
  h << 1, 1, 2, 2;
  EXPECT_THROW(wls_solve(dense_model(h, {1, 2}, {1, 1})), NumericalError);
}

TEST(VarianceFixedPoint, LeafOnlyIsImmediate) {
  Eigen::MatrixXd h = Eigen::Vector2d(2.0, -0.5).asDiagonal();
  const auto g = build_factor_graph(dense_model(h, {1, 1}, {1, 3}));
  const auto v = solve_variance_fixed_point(g);
  EXPECT_EQ(v.f2x[0], 0.25);
  EXPECT_EQ(v.f2x[1], 12.0);
  EXPECT_TRUE(std::isnan(v.x2f[0]));
}

TEST(VarianceFixedPoint, MatchesLongEngineRun) {
  const SixVariable six;
  const auto v = solve_variance_fixed_point(six.graph);
  MessageState s = init_messages(six.graph);
  for (int k = 0; k < 500; ++k) s = global_iteration(six.graph, s);
  for (std::size_t e = 0; e < six.graph.edge_count(); ++e) {
    EXPECT_NEAR(s.f2x_variance[e], v.f2x[e], 1e-10 * v.f2x[e]);
    if (six.graph.is_branch(six.graph.edge_factor(e))) EXPECT_NEAR(s.x2f_variance[e], v.x2f[e], 1e-10 * v.x2f[e]);
  }
}

TEST(Omega, NilpotentOnTree) {
  const auto g = build_factor_graph(test::chain_model(3));
  const auto v = solve_variance_fixed_point(g);
  const Eigen::MatrixXd omega = build_omega(g, v);
  ASSERT_EQ(omega.rows(), 4);
  EXPECT_GT(omega.cwiseAbs().maxCoeff(), 0.0);
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(4, 4);
  for (int k = 0; k < 4; ++k) power = power * omega;
  EXPECT_EQ(power.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Omega, SingleBranchFactorIsZero) {
  Eigen::MatrixXd h(4, 3);
  h << 1, 2, -1, 1, 0, 0, 0, 1, 0, 0, 0, 1;
  const auto g = build_factor_graph(dense_model(h, {1, 2, 3, 4}, {1, 1, 1, 1}));
  const Eigen::MatrixXd omega = build_omega(g, solve_variance_fixed_point(g));
  EXPECT_EQ(omega.rows(), 3);
  EXPECT_TRUE(omega.isZero(0.0));
}

TEST(Omega, ElementFormulaAndSparsity) {
  const SixVariable six;
  const auto& g = six.graph;
  const auto v = solve_variance_fixed_point(g);
  const Eigen::MatrixXd omega = build_omega(g, v);
  const auto& branch = g.branch_edges();
  for (std::size_t q = 0; q < branch.size(); ++q) {
    const std::size_t eq = branch[q], fi = g.edge_factor(eq), xj = g.edge_variable(eq);
    for (std::size_t p = 0; p < branch.size(); ++p) {
      const std::size_t ep = branch[p], fy = g.edge_factor(ep), xk = g.edge_variable(ep);
      double expected = 0.0;
      if (fy != fi && xk != xj) {
        for (std::size_t e = g.edge_begin(fi); e < g.edge_end(fi); ++e) {
          if (g.edge_variable(e) == xk) {
            expected = -(g.coefficient(e) / g.coefficient(eq)) * v.x2f[e] / v.f2x[ep];
          }
        }
      }
      EXPECT_NEAR(omega(Eigen::Index(q), Eigen::Index(p)), expected, 1e-14 * std::max(1.0, std::abs(expected)));
    }
  }
}

TEST(Omega, JacobianOfEngineStep) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const LinearModel model = test::loopy_model(6, 5, 3, 1.0, seed);
    const auto g = build_factor_graph(model);
    const auto v = solve_variance_fixed_point(g);
    const Eigen::MatrixXd omega = build_omega(g, v);
    const Eigen::Index d = omega.rows();
    const Eigen::VectorXd base = engine_step(g, v, Eigen::VectorXd::Zero(d));
    const double h = 1e-3;
    for (Eigen::Index p = 0; p < d; ++p) {
      Eigen::VectorXd up = Eigen::VectorXd::Zero(d), down = Eigen::VectorXd::Zero(d);
      up[p] = h;
      down[p] = -h;
      const Eigen::VectorXd col = (engine_step(g, v, up) - engine_step(g, v, down)) / (2 * h);
      for (Eigen::Index q = 0; q < d; ++q) EXPECT_NEAR(col[q], omega(q, p), 1e-8);
    }
    EXPECT_TRUE(base.isApprox(build_cf(g, v), 1e-12) || (base - build_cf(g, v)).norm() < 1e-12);
  }
}

TEST(Cf, NoLeavesIsObservationOverCoefficient) {
  Eigen::MatrixXd h(3, 3);
  h << 1, 2, 0, 0, 1, -1, 3, 0, 1;
  const auto g = build_factor_graph(dense_model(h, {1, 2, 3}, {1, 1, 1}));
  const Eigen::VectorXd cf = build_cf(g, solve_variance_fixed_point(g));
  const auto& branch = g.branch_edges();
  for (std::size_t q = 0; q < branch.size(); ++q) {
    const std::size_t e = branch[q];
    EXPECT_NEAR(cf[Eigen::Index(q)], g.observation(g.edge_factor(e)) / g.coefficient(e), 1e-12);
  }
}

TEST(Cf, HandDerivedExample) {
  // f0: 2 x0 + 3 x1 = 6; leaf x1 = 1 (v=1); a leaf on x0 keeps it determined.
  Eigen::MatrixXd h(3, 2);
  h << 2, 3, 0, 1, 1, 0;
  const auto g = build_factor_graph(dense_model(h, {6, 1, 0}, {1, 1, 1}));
  const auto v = solve_variance_fixed_point(g);
  const Eigen::VectorXd cf = build_cf(g, v);
  ASSERT_EQ(g.edge_variable(g.branch_edges()[0]), 0u);
  EXPECT_NEAR(v.x2f[1], 1.0, 1e-12);
  EXPECT_NEAR(cf[0], 1.5, 1e-12);
}

TEST(Cf, EngineStepIsAffine) {
  const SixVariable six;
  const auto v = solve_variance_fixed_point(six.graph);
  const Eigen::MatrixXd omega = build_omega(six.graph, v);
  const Eigen::VectorXd cf = build_cf(six.graph, v);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd m(omega.rows());
    for (Eigen::Index q = 0; q < m.size(); ++q) m[q] = normal(rng);
    const Eigen::VectorXd expected = cf + omega * m;
    const Eigen::VectorXd got = engine_step(six.graph, v, m);
    EXPECT_LE((got - expected).lpNorm<Eigen::Infinity>(), 1e-9);
  }
}

TEST(SpectralRadius, Examples) {
  EXPECT_EQ(spectral_radius(Eigen::MatrixXd::Zero(3, 3)), 0.0);
  Eigen::MatrixXd nil(2, 2);
  nil << 0, 2, 0, 0;
  EXPECT_NEAR(spectral_radius(nil), 0.0, 1e-12);
  Eigen::MatrixXd a(2, 2);
  a << 0.5, 0.1, 0.2, 0.3;
  const double tr = 0.8, det = 0.5 * 0.3 - 0.1 * 0.2;
  const double root = (tr + std::sqrt(tr * tr - 4 * det)) / 2;
  SpectralOptions power;
  power.method = SpectralMethod::power;
  EXPECT_NEAR(spectral_radius(a, power), root, 1e-8);
  SpectralOptions dense;
  dense.method = SpectralMethod::dense;
  EXPECT_NEAR(spectral_radius(a, dense), root, 1e-12);
}

TEST(SpectralRadius, PowerMatchesDenseWithComplexPairs) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd a(30, 30);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng) / 5.0;
  // A dominant rotation block makes the top eigenvalues a complex pair.
  a(0, 0) = 0.0;
  a(0, 1) = 3.0;
  a(1, 0) = -3.0;
  a(1, 1) = 0.0;
  SpectralOptions dense;
  dense.method = SpectralMethod::dense;
  SpectralOptions power;
  power.method = SpectralMethod::power;
  EXPECT_NEAR(spectral_radius(a, power), spectral_radius(a, dense), 1e-6);
}

TEST(FixedPointMeans, ZeroOmegaAndSingular) {
  const Eigen::VectorXd c = Eigen::Vector3d(1, -2, 3);
  EXPECT_EQ(fixed_point_means(Eigen::MatrixXd::Zero(3, 3), c), c);
  EXPECT_THROW(fixed_point_means(Eigen::MatrixXd::Identity(3, 3), c), NumericalError);
}

TEST(FixedPointMeans, MarginalsMatchWls) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto gen = generate_model(test::small_sdd(seed));
    const auto g = build_factor_graph(gen.model);
    const SpectralDecomposition d = decompose(g);
    ASSERT_LT(spectral_radius(d.omega), 1.0);
    const Eigen::VectorXd m = fixed_point_means(d.omega, d.c_f);
    EXPECT_LE((m - (d.c_f + d.omega * m)).lpNorm<Eigen::Infinity>(), 1e-9 * m.lpNorm<Eigen::Infinity>());
    const auto marg = marginals_from_messages(g, d.v_star, m);
    const auto wls = wls_solve(gen.model);
    for (std::size_t j = 0; j < wls.size(); ++j) EXPECT_NEAR(marg[j], wls[j], 1e-8);
  }
}

TEST(FixedPointMeans, MatchesConvergedEngineMessages) {
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 5 && seed < 100; ++seed) {
    const LinearModel model = test::loopy_model(8, 6, 3, 1.0, seed);
    FactorGraph g;
    try {
      g = build_factor_graph(model);
    } catch (const ValidationError&) {
      continue;
    }
    const SpectralDecomposition d = decompose(g);
    if (spectral_radius(d.omega) > 0.9) continue;
    const Eigen::VectorXd m = fixed_point_means(d.omega, d.c_f);
    MessageState s = init_messages(g);
    RunConfig rc;
    rc.tolerance = 1e-13;
    ASSERT_TRUE(run_synchronous(g, s, rc).converged);
    const auto& branch = g.branch_edges();
    double worst = 0.0;
    for (std::size_t q = 0; q < branch.size(); ++q) {
      worst = std::max(worst, std::abs(s.f2x_mean[branch[q]] - m[Eigen::Index(q)]));
    }
    EXPECT_LE(worst, 1e-6) << "seed " << seed;
    ++checked;
  }
  EXPECT_EQ(checked, 5);
}

TEST(QProjector, Extremes) {
  GeneratorSpec spec = test::small_sdd(2);
  spec.expected_tie_edges = 0.0;
  const auto gen = generate_model(spec);
  const auto g = build_factor_graph(gen.model);
  const auto c = classify_factors(g, gen.partition, gen.row_home);
  EXPECT_TRUE(build_q_projector(g, c).isOnes());

  // Every branch row spans both clusters.
  Eigen::MatrixXd h(4, 2);
  h << 1, 1, 2, -1, 1, 0, 0, 1;
  const auto g2 = build_factor_graph(dense_model(h, {1, 1, 1, 1}, {1, 1, 1, 1}));
  const auto c2 = classify_factors(g2, ClusterPartition::contiguous({1, 1}));
  EXPECT_TRUE(build_q_projector(g2, c2).isZero(0.0));
}

TEST(QProjector, IdempotentAndSelectsInternalRows) {
  const SixVariable six;
  const Eigen::VectorXd q = build_q_projector(six.graph, six.classification);
  const Eigen::MatrixXd Q = q.asDiagonal();
  EXPECT_EQ(Q * Q, Q);
  const auto v = solve_variance_fixed_point(six.graph);
  const Eigen::MatrixXd omega = build_omega(six.graph, v);
  const Eigen::MatrixXd qo = Q * omega;
  const auto& branch = six.graph.branch_edges();
  for (std::size_t r = 0; r < branch.size(); ++r) {
    const bool tie = six.classification.is_tie(six.graph.edge_factor(branch[r]));
    EXPECT_EQ(q[Eigen::Index(r)], tie ? 0.0 : 1.0);
    const Eigen::Index row = Eigen::Index(r);
    if (tie) {
      EXPECT_TRUE(qo.row(row).isZero(0.0));
    } else {
      EXPECT_EQ(qo.row(row), omega.row(row));
    }
  }
}

TEST(QProjector, LocalRecursionMatchesEngine) {
  const SixVariable six;
  const SpectralDecomposition d = decompose(six.graph, &six.classification);
  const auto& g = six.graph;
  const auto& branch = g.branch_edges();
  // Start at v*, one global step from a random m, then three local steps.
  MessageState s = init_messages(g);
  for (std::size_t e = 0; e < g.edge_count(); ++e) s.f2x_variance[e] = d.v_star.f2x[e];
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal(0.0, 2.0);
  Eigen::VectorXd m(Eigen::Index(branch.size()));
  for (std::size_t q = 0; q < branch.size(); ++q) {
    m[Eigen::Index(q)] = normal(rng);
    s.f2x_mean[branch[q]] = m[Eigen::Index(q)];
  }
  s = global_iteration(g, s);
  m = d.global_step(m);
  const Eigen::VectorXd snapshot = m;
  const auto view = freeze_tie_factors(g, six.classification, s);
  for (int k = 0; k < 3; ++k) {
    s = local_iteration(view, s);
    m = d.local_step(m, snapshot);
    for (std::size_t q = 0; q < branch.size(); ++q) {
      EXPECT_NEAR(s.f2x_mean[branch[q]], m[Eigen::Index(q)], 1e-9) << "step " << k << " coordinate " << q;
    }
  }
}

TEST(Decompose, EdgeIndexLayout) {
  const SixVariable six;
  const SpectralDecomposition d = decompose(six.graph);
  ASSERT_EQ(d.dimension, six.graph.branch_edges().size());
  for (std::size_t q = 0; q < d.dimension; ++q) {
    const std::size_t e = six.graph.branch_edges()[q];
    EXPECT_EQ(d.edge_index[q], std::make_pair(six.graph.edge_factor(e), six.graph.edge_variable(e)));
  }
  EXPECT_TRUE(d.q_projector.isOnes());
}

}  // namespace
}  // namespace agbp
