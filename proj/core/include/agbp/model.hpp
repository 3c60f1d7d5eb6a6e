#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace agbp {

/// One nonzero coefficient h_ij of the observation matrix.
struct Entry {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;

  friend bool operator==(const Entry&, const Entry&) = default;
};

/// Sparse linear model z = H x + u with u_i ~ N(0, v_i).
///
/// Entries are kept sorted by (row, col). The constructor rejects duplicate
/// coordinates, out-of-range indices, empty rows, explicit zeros and
/// non-positive variances, so every LinearModel in circulation is valid.
class LinearModel {
 public:
  LinearModel() = default;
  LinearModel(std::size_t rows, std::size_t cols, std::vector<Entry> entries,
              std::vector<double> observations, std::vector<double> variances);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nonzeros() const noexcept { return entries_.size(); }

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  const std::vector<double>& observations() const noexcept { return observations_; }
  const std::vector<double>& variances() const noexcept { return variances_; }

  /// Replaces (z_i, v_i) of one row. Throws ValidationError on bad input.
  void set_observation(std::size_t row, double z, double v);

  Eigen::MatrixXd dense() const;

  friend bool operator==(const LinearModel&, const LinearModel&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Entry> entries_;
  std::vector<double> observations_;
  std::vector<double> variances_;
};

/// Assignment of variables to clusters c_0 .. c_{s-1}; every cluster non-empty.
class ClusterPartition {
 public:
  ClusterPartition() = default;
  ClusterPartition(std::size_t cluster_count, std::vector<std::size_t> assignment);

  /// Contiguous blocks: the first sizes[0] variables form cluster 0, and so on.
  static ClusterPartition contiguous(const std::vector<std::size_t>& sizes);
  /// Everything in a single cluster.
  static ClusterPartition single(std::size_t variables);

  std::size_t cluster_count() const noexcept { return cluster_count_; }
  std::size_t variable_count() const noexcept { return assignment_.size(); }
  std::size_t cluster_of(std::size_t variable) const { return assignment_.at(variable); }
  const std::vector<std::size_t>& assignment() const noexcept { return assignment_; }

  friend bool operator==(const ClusterPartition&, const ClusterPartition&) = default;

 private:
  std::size_t cluster_count_ = 0;
  std::vector<std::size_t> assignment_;
};

enum class MatrixKind { symmetric, nonsymmetric, rectangular };

std::string to_string(MatrixKind kind);
MatrixKind matrix_kind_from_string(const std::string& name);

/// Row variances of generated models. Square kinds use `independent` for every
/// row; rectangular models use `independent` for the n_c core rows of each
/// cluster and `dependent` for the extra rows.
struct VarianceScheme {
  double independent = 1.0;
  double dependent = 1.0;

  static VarianceScheme uniform(double v) { return {v, v}; }
};

/// Parameters of the randomized clustered instance generator.
///
/// Expected edge counts exclude the diagonal entries that the dominance rule
/// adds to square cores; `expected_internal_edges` counts off-diagonal entries
/// of each H_{c_i}, `expected_tie_edges` counts entries of all tie blocks
/// H_{c_i,c_j} owned by one cluster.
struct GeneratorSpec {
  std::size_t cluster_count = 2;
  std::size_t rows_per_cluster = 100;
  std::size_t cols_per_cluster = 100;
  double expected_internal_edges = 600.0;
  double expected_tie_edges = 5.0;
  MatrixKind kind = MatrixKind::symmetric;
  double diagonal_increment = 0.01;
  VarianceScheme variances{};
  std::uint64_t seed = 0;

  /// Throws ValidationError describing the first violated constraint.
  void validate() const;
};

/// A generated instance together with its block provenance.
struct GeneratedModel {
  LinearModel model;
  ClusterPartition partition;
  /// Cluster whose block row produced each factor (row) of the model.
  std::vector<std::size_t> row_home;
  /// State vector x used to synthesise the observations.
  std::vector<double> state;
};

/// Draws one instance. Deterministic in `spec` (including its seed).
GeneratedModel generate_model(const GeneratorSpec& spec);

/// Synthesises observations z = H x + u for a state x, u_i ~ N(0, v_i).
std::vector<double> synthesise_observations(const std::vector<Entry>& entries,
                                            std::size_t rows,
                                            const std::vector<double>& state,
                                            const std::vector<double>& variances,
                                            std::mt19937_64& rng);

/// Draws x ~ Uniform[0, 1)^n.
std::vector<double> draw_state(std::size_t n, std::mt19937_64& rng);

/// Block description of a clustered model. `blocks[i][j]` is H_{c_i,c_j};
/// an empty (0x0) off-diagonal block stands for a zero block of the implied
/// dimensions. Diagonal blocks H_{c_i} fix m_{c_i} (rows) and n_{c_i} (cols).
struct ClusteredBlocks {
  std::vector<std::vector<Eigen::MatrixXd>> blocks;
  std::vector<Eigen::VectorXd> observations;
  std::vector<Eigen::VectorXd> variances;
};

/// Stacks the blocks into a global model; row r of cluster i maps to global
/// row sum_{j<i} m_{c_j} + r, and columns are offset the same way.
LinearModel assemble_global(const ClusteredBlocks& blocks);

/// Partition implied by the column sizes of the diagonal blocks.
ClusterPartition block_partition(const ClusteredBlocks& blocks);

}  // namespace agbp
