#include "agbp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "agbp/error.hpp"

namespace agbp {

namespace {
constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

std::vector<std::size_t> coordinate_of_edge(const FactorGraph& graph) {
  std::vector<std::size_t> pos(graph.edge_count(), npos);
  const auto& branch = graph.branch_edges();
  for (std::size_t q = 0; q < branch.size(); ++q) pos[branch[q]] = q;
  return pos;
}
}  // namespace

std::vector<double> wls_solve(const LinearModel& model) {
  const Eigen::Index m = static_cast<Eigen::Index>(model.rows());
  const Eigen::Index n = static_cast<Eigen::Index>(model.cols());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, n);
  Eigen::VectorXd b(m);
  Eigen::VectorXd w(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    w(i) = 1.0 / model.variances()[static_cast<std::size_t>(i)];
    b(i) = std::sqrt(w(i)) * model.observations()[static_cast<std::size_t>(i)];
  }
  for (const Entry& e : model.entries()) {
    const auto r = static_cast<Eigen::Index>(e.row);
    a(r, static_cast<Eigen::Index>(e.col)) = std::sqrt(w(r)) * e.value;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-12);
  if (qr.rank() < n) {
    throw NumericalError("wls: coefficient matrix is rank deficient (rank " +
                         std::to_string(qr.rank()) + " < " + std::to_string(n) + ")");
  }
  const Eigen::VectorXd x = qr.solve(b);

  const Eigen::MatrixXd normal = a.transpose() * a;
  const Eigen::VectorXd rhs = a.transpose() * b;
  const double residual = (normal * x - rhs).lpNorm<Eigen::Infinity>();
  if (residual > 1e-8 * rhs.lpNorm<Eigen::Infinity>()) {
    throw NumericalError("wls: normal-equation residual " + std::to_string(residual) +
                         " exceeds tolerance");
  }
  return {x.data(), x.data() + x.size()};
}

VarianceFixedPoint solve_variance_fixed_point(const FactorGraph& graph, double initial_variance,
                                              double tolerance, std::size_t max_iterations) {
  if (!(initial_variance > 0.0) || !std::isfinite(initial_variance)) {
    throw ValidationError("variance fixed point: initial variance must be positive and finite");
  }
  const std::size_t edges = graph.edge_count();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  VarianceFixedPoint out{std::vector<double>(edges), std::vector<double>(edges, nan), 0};
  for (std::size_t f = 0; f < graph.factor_count(); ++f) {
    for (std::size_t e = graph.edge_begin(f); e < graph.edge_end(f); ++e) {
      const double h = graph.coefficient(e);
      out.f2x[e] = graph.is_leaf(f) ? graph.variance(f) / (h * h) : initial_variance;
    }
  }
  const auto& branch = graph.branch_edges();
  std::vector<double> next_f2x = out.f2x;
  while (true) {
    if (out.iterations >= max_iterations) {
      throw NumericalError("variance fixed point: no convergence after " +
                           std::to_string(max_iterations) + " iterations");
    }
    for (std::size_t e : branch) {
      double precision = graph.prior_precision();
      for (std::size_t other : graph.variable_edges(graph.edge_variable(e))) {
        if (other != e) precision += 1.0 / out.f2x[other];
      }
      out.x2f[e] = 1.0 / precision;
    }
    double worst = 0.0;
    for (std::size_t e : branch) {
      const std::size_t f = graph.edge_factor(e);
      double acc = graph.variance(f);
      for (std::size_t other = graph.edge_begin(f); other < graph.edge_end(f); ++other) {
        if (other == e) continue;
        const double h = graph.coefficient(other);
        acc += h * h * out.x2f[other];
      }
      const double h = graph.coefficient(e);
      next_f2x[e] = acc / (h * h);
      worst = std::max(worst, std::abs(next_f2x[e] - out.f2x[e]) / next_f2x[e]);
    }
    out.f2x.swap(next_f2x);
    ++out.iterations;
    if (worst <= tolerance) break;
  }
  // Make x2f consistent with the returned f2x.
  for (std::size_t e : branch) {
    double precision = graph.prior_precision();
    for (std::size_t other : graph.variable_edges(graph.edge_variable(e))) {
      if (other != e) precision += 1.0 / out.f2x[other];
    }
    out.x2f[e] = 1.0 / precision;
  }
  return out;
}

Eigen::MatrixXd build_omega(const FactorGraph& graph, const VarianceFixedPoint& v_star) {
  const auto& branch = graph.branch_edges();
  const auto d = static_cast<Eigen::Index>(branch.size());
  const std::vector<std::size_t> pos = coordinate_of_edge(graph);
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index q = 0; q < d; ++q) {
    const std::size_t eq = branch[static_cast<std::size_t>(q)];
    const std::size_t fi = graph.edge_factor(eq);
    const double hij = graph.coefficient(eq);
    for (std::size_t ek = graph.edge_begin(fi); ek < graph.edge_end(fi); ++ek) {
      if (ek == eq) continue;
      const double ratio = graph.coefficient(ek) / hij * v_star.x2f[ek];
      for (std::size_t ep : graph.variable_edges(graph.edge_variable(ek))) {
        if (graph.edge_factor(ep) == fi || pos[ep] == npos) continue;
        omega(q, static_cast<Eigen::Index>(pos[ep])) = -ratio / v_star.f2x[ep];
      }
    }
  }
  return omega;
}

Eigen::VectorXd build_cf(const FactorGraph& graph, const VarianceFixedPoint& v_star) {
  const auto& branch = graph.branch_edges();
  Eigen::VectorXd c(static_cast<Eigen::Index>(branch.size()));
  for (std::size_t q = 0; q < branch.size(); ++q) {
    const std::size_t eq = branch[q];
    const std::size_t fi = graph.edge_factor(eq);
    const double hij = graph.coefficient(eq);
    double value = graph.observation(fi) / hij;
    for (std::size_t ek = graph.edge_begin(fi); ek < graph.edge_end(fi); ++ek) {
      if (ek == eq) continue;
      double leaf_sum = graph.prior_precision() * graph.prior_mean();
      for (std::size_t er : graph.variable_edges(graph.edge_variable(ek))) {
        const std::size_t fr = graph.edge_factor(er);
        if (!graph.is_leaf(fr)) continue;
        const double h = graph.coefficient(er);
        leaf_sum += (graph.observation(fr) / h) / v_star.f2x[er];
      }
      value -= graph.coefficient(ek) / hij * leaf_sum * v_star.x2f[ek];
    }
    c(static_cast<Eigen::Index>(q)) = value;
  }
  return c;
}

Eigen::VectorXd build_q_projector(const FactorGraph& graph,
                                  const FactorClassification& classification) {
  if (classification.kind.size() != graph.factor_count()) {
    throw ValidationError("Q projector: classification does not match the graph");
  }
  const auto& branch = graph.branch_edges();
  Eigen::VectorXd q(static_cast<Eigen::Index>(branch.size()));
  for (std::size_t k = 0; k < branch.size(); ++k) {
    q(static_cast<Eigen::Index>(k)) = classification.is_tie(graph.edge_factor(branch[k])) ? 0.0 : 1.0;
  }
  return q;
}

namespace {

double dense_radius(const Eigen::MatrixXd& matrix) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(matrix, false);
  if (solver.info() != Eigen::Success) throw NumericalError("spectral radius: eigensolver failed");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

double power_radius(const Eigen::MatrixXd& matrix, const SpectralOptions& options) {
  const Eigen::Index d = matrix.rows();
  const Eigen::Index k = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(options.block_size), 1, d);
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd block(d, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) block(i, j) = normal(rng);
  }
  Eigen::MatrixXd basis = Eigen::HouseholderQR<Eigen::MatrixXd>(block).householderQ() *
                          Eigen::MatrixXd::Identity(d, k);
  double estimate = std::numeric_limits<double>::infinity();
  int stable = 0;
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    const Eigen::MatrixXd image = matrix * basis;
    if (image.norm() == 0.0) return 0.0;
    const Eigen::MatrixXd ritz = basis.transpose() * image;
    Eigen::EigenSolver<Eigen::MatrixXd> small(ritz, false);
    const double current = small.eigenvalues().cwiseAbs().maxCoeff();
    if (std::abs(current - estimate) <= options.tolerance * std::max(current, 1e-300)) {
      if (++stable >= 3) return current;
    } else {
      stable = 0;
    }
    estimate = current;
    basis = Eigen::HouseholderQR<Eigen::MatrixXd>(image).householderQ() *
            Eigen::MatrixXd::Identity(d, k);
  }
  throw NumericalError("spectral radius: power iteration did not converge after " +
                       std::to_string(options.max_iterations) + " steps (best estimate " +
                       std::to_string(estimate) + ")");
}

}  // namespace

double spectral_radius(const Eigen::MatrixXd& matrix, const SpectralOptions& options) {
  if (matrix.rows() != matrix.cols()) throw ValidationError("spectral radius: matrix is not square");
  if (matrix.rows() == 0) return 0.0;
  const bool dense = options.method == SpectralMethod::dense ||
                     (options.method == SpectralMethod::automatic &&
                      static_cast<std::size_t>(matrix.rows()) <= options.dense_limit);
  return dense ? dense_radius(matrix) : power_radius(matrix, options);
}

Eigen::VectorXd fixed_point_means(const Eigen::MatrixXd& omega, const Eigen::VectorXd& c_f) {
  if (omega.rows() != omega.cols() || omega.rows() != c_f.size()) {
    throw ValidationError("fixed point: dimension mismatch between Omega and c_f");
  }
  if (c_f.size() == 0) return c_f;
  const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(omega.rows(), omega.cols()) - omega;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
  if (!(lu.rcond() > 1e-14)) throw NumericalError("fixed point: I - Omega is singular");
  const Eigen::VectorXd m = lu.solve(c_f);
  const double residual = (m - (c_f + omega * m)).lpNorm<Eigen::Infinity>();
  if (!(residual <= 1e-9 * std::max(m.lpNorm<Eigen::Infinity>(), 1e-300)) && residual != 0.0) {
    throw NumericalError("fixed point: residual " + std::to_string(residual) + " too large");
  }
  return m;
}

std::vector<double> marginals_from_messages(const FactorGraph& graph,
                                            const VarianceFixedPoint& v_star,
                                            const Eigen::VectorXd& m_f) {
  if (static_cast<std::size_t>(m_f.size()) != graph.branch_edges().size()) {
    throw ValidationError("marginals: m_f does not match the branch edge layout");
  }
  const std::vector<std::size_t> pos = coordinate_of_edge(graph);
  std::vector<double> mean(graph.variable_count());
  for (std::size_t j = 0; j < graph.variable_count(); ++j) {
    double precision = graph.prior_precision();
    double weighted = precision * graph.prior_mean();
    for (std::size_t e : graph.variable_edges(j)) {
      const std::size_t f = graph.edge_factor(e);
      const double msg = pos[e] == npos ? graph.observation(f) / graph.coefficient(e)
                                        : m_f(static_cast<Eigen::Index>(pos[e]));
      precision += 1.0 / v_star.f2x[e];
      weighted += msg / v_star.f2x[e];
    }
    mean[j] = weighted / precision;
  }
  return mean;
}

Eigen::VectorXd SpectralDecomposition::global_step(const Eigen::VectorXd& m) const {
  return c_f + omega * m;
}

Eigen::VectorXd SpectralDecomposition::local_step(const Eigen::VectorXd& m,
                                                  const Eigen::VectorXd& m_snapshot) const {
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(q_projector.size());
  return q_projector.cwiseProduct(c_f + omega * m) + (ones - q_projector).cwiseProduct(m_snapshot);
}

SpectralDecomposition decompose(const FactorGraph& graph, const FactorClassification* classification) {
  SpectralDecomposition s;
  s.v_star = solve_variance_fixed_point(graph);
  s.dimension = graph.branch_edges().size();
  s.edge_index.reserve(s.dimension);
  for (std::size_t e : graph.branch_edges()) {
    s.edge_index.emplace_back(graph.edge_factor(e), graph.edge_variable(e));
  }
  s.omega = build_omega(graph, s.v_star);
  s.c_f = build_cf(graph, s.v_star);
  s.q_projector = classification ? build_q_projector(graph, *classification)
                                 : Eigen::VectorXd::Ones(static_cast<Eigen::Index>(s.dimension));
  return s;
}

}  // namespace agbp
