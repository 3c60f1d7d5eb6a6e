#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "agbp/graph.hpp"
#include "agbp/model.hpp"

namespace agbp {

/// Dense weighted least-squares solution (H^T W H)^{-1} H^T W z, W = diag(1/v).
/// Throws NumericalError when H is rank deficient or the normal-equation
/// residual check fails.
std::vector<double> wls_solve(const LinearModel& model);

/// Fixed point of the variance recursion, indexed by edge id. `x2f` is NaN
/// on leaf edges.
struct VarianceFixedPoint {
  std::vector<double> f2x;
  std::vector<double> x2f;
  std::size_t iterations = 0;
};

/// Iterates the variance half-updates from `initial_variance` on every branch
/// edge until the largest relative change is at most `tolerance`.
VarianceFixedPoint solve_variance_fixed_point(const FactorGraph& graph,
                                              double initial_variance = 1e3,
                                              double tolerance = 1e-12,
                                              std::size_t max_iterations = 1000000);

/// Coordinate q of m_f is graph.branch_edges()[q].
Eigen::MatrixXd build_omega(const FactorGraph& graph, const VarianceFixedPoint& v_star);
Eigen::VectorXd build_cf(const FactorGraph& graph, const VarianceFixedPoint& v_star);

/// Diagonal of Q: 1 on edges of internal branch factors, 0 on tie edges.
Eigen::VectorXd build_q_projector(const FactorGraph& graph,
                                  const FactorClassification& classification);

enum class SpectralMethod : std::uint8_t { automatic, dense, power };

struct SpectralOptions {
  SpectralMethod method = SpectralMethod::automatic;
  std::size_t dense_limit = 2000;  // automatic uses the dense solver up to here
  std::size_t block_size = 4;      // subspace width of the power method
  double tolerance = 1e-8;
  std::size_t max_iterations = 100000;
  std::uint64_t seed = 0;
};

/// Largest eigenvalue magnitude. The power method is a block (subspace)
/// iteration with Rayleigh-Ritz extraction, so complex pairs are resolved.
double spectral_radius(const Eigen::MatrixXd& matrix, const SpectralOptions& options = {});

/// Solves (I - Omega) m = c_f. Throws NumericalError when I - Omega is
/// singular or the result fails m = c_f + Omega m to 1e-9 relative.
Eigen::VectorXd fixed_point_means(const Eigen::MatrixXd& omega, const Eigen::VectorXd& c_f);

/// Marginal means implied by branch messages `m_f` (layout of build_omega)
/// together with the constant leaf messages and variances `v_star`.
std::vector<double> marginals_from_messages(const FactorGraph& graph,
                                            const VarianceFixedPoint& v_star,
                                            const Eigen::VectorXd& m_f);

/// Everything needed to study the mean recursion m' = c_f + Omega m.
struct SpectralDecomposition {
  std::size_t dimension = 0;
  /// (factor, variable) of each coordinate of m_f.
  std::vector<std::pair<std::size_t, std::size_t>> edge_index;
  Eigen::MatrixXd omega;
  Eigen::VectorXd c_f;
  VarianceFixedPoint v_star;
  /// Diagonal of Q; all ones when no classification was supplied.
  Eigen::VectorXd q_projector;

  /// One global step m' = c_f + Omega m.
  Eigen::VectorXd global_step(const Eigen::VectorXd& m) const;
  /// One local step m' = Q c_f + (I - Q) m_snapshot + Q Omega m.
  Eigen::VectorXd local_step(const Eigen::VectorXd& m, const Eigen::VectorXd& m_snapshot) const;
};

SpectralDecomposition decompose(const FactorGraph& graph,
                                const FactorClassification* classification = nullptr);

}  // namespace agbp
