#include "agbp/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "agbp/error.hpp"

namespace agbp {

LinearModel::LinearModel(std::size_t rows, std::size_t cols, std::vector<Entry> entries,
                         std::vector<double> observations, std::vector<double> variances)
    : rows_(rows),
      cols_(cols),
      entries_(std::move(entries)),
      observations_(std::move(observations)),
      variances_(std::move(variances)) {
  if (observations_.size() != rows_ || variances_.size() != rows_) {
    throw ValidationError("linear model: expected " + std::to_string(rows_) +
                          " observations and variances, got " +
                          std::to_string(observations_.size()) + " and " +
                          std::to_string(variances_.size()));
  }
  std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<bool> row_used(rows_, false);
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    const Entry& e = entries_[k];
    if (e.row >= rows_ || e.col >= cols_) {
      throw ValidationError("linear model: entry (" + std::to_string(e.row) + "," +
                            std::to_string(e.col) + ") outside " + std::to_string(rows_) +
                            "x" + std::to_string(cols_));
    }
    if (k > 0 && entries_[k - 1].row == e.row && entries_[k - 1].col == e.col) {
      throw ValidationError("linear model: duplicate entry (" + std::to_string(e.row) + "," +
                            std::to_string(e.col) + ")");
    }
    if (e.value == 0.0 || !std::isfinite(e.value)) {
      throw ValidationError("linear model: entry (" + std::to_string(e.row) + "," +
                            std::to_string(e.col) + ") must be finite and nonzero");
    }
    row_used[e.row] = true;
  }
  for (std::size_t i = 0; i < rows_; ++i) {
    if (!row_used[i]) {
      throw ValidationError("linear model: row " + std::to_string(i) + " has no entries");
    }
    set_observation(i, observations_[i], variances_[i]);
  }
}

void LinearModel::set_observation(std::size_t row, double z, double v) {
  if (row >= rows_) {
    throw ValidationError("linear model: row " + std::to_string(row) + " out of range");
  }
  if (!std::isfinite(z)) {
    throw ValidationError("linear model: observation of row " + std::to_string(row) +
                          " is not finite");
  }
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ValidationError("linear model: variance of row " + std::to_string(row) +
                          " must be positive and finite");
  }
  observations_[row] = z;
  variances_[row] = v;
}

Eigen::MatrixXd LinearModel::dense() const {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows_),
                                            static_cast<Eigen::Index>(cols_));
  for (const Entry& e : entries_) {
    h(static_cast<Eigen::Index>(e.row), static_cast<Eigen::Index>(e.col)) = e.value;
  }
  return h;
}

ClusterPartition::ClusterPartition(std::size_t cluster_count, std::vector<std::size_t> assignment)
    : cluster_count_(cluster_count), assignment_(std::move(assignment)) {
  if (cluster_count_ == 0) throw ValidationError("partition: cluster count must be >= 1");
  std::vector<bool> seen(cluster_count_, false);
  for (std::size_t j = 0; j < assignment_.size(); ++j) {
    if (assignment_[j] >= cluster_count_) {
      throw ValidationError("partition: variable " + std::to_string(j) + " mapped to cluster " +
                            std::to_string(assignment_[j]) + " outside [0, " +
                            std::to_string(cluster_count_) + ")");
    }
    seen[assignment_[j]] = true;
  }
  for (std::size_t c = 0; c < cluster_count_; ++c) {
    if (!seen[c]) throw ValidationError("partition: cluster " + std::to_string(c) + " is empty");
  }
}

ClusterPartition ClusterPartition::contiguous(const std::vector<std::size_t>& sizes) {
  std::vector<std::size_t> assignment;
  for (std::size_t c = 0; c < sizes.size(); ++c) assignment.insert(assignment.end(), sizes[c], c);
  return ClusterPartition(sizes.size(), std::move(assignment));
}

ClusterPartition ClusterPartition::single(std::size_t variables) {
  return ClusterPartition(1, std::vector<std::size_t>(variables, 0));
}

std::string to_string(MatrixKind kind) {
  switch (kind) {
    case MatrixKind::symmetric: return "symmetric";
    case MatrixKind::nonsymmetric: return "nonsymmetric";
    case MatrixKind::rectangular: return "rectangular";
  }
  return "unknown";
}

MatrixKind matrix_kind_from_string(const std::string& name) {
  if (name == "symmetric") return MatrixKind::symmetric;
  if (name == "nonsymmetric") return MatrixKind::nonsymmetric;
  if (name == "rectangular") return MatrixKind::rectangular;
  throw ValidationError("unknown matrix kind '" + name +
                        "' (expected symmetric, nonsymmetric or rectangular)");
}

namespace {

constexpr int kMaxRowRetries = 100;

// Inclusion probabilities of one candidate position, per block type.
struct EdgeProbabilities {
  double internal_core = 0.0;   // off-diagonal position of a square core row
  double internal_extra = 0.0;  // any internal position of a rectangular extra row
  double tie = 0.0;             // any tie-block position
  // Symmetric kinds sample unordered pairs; the mirrored entry doubles the count.
  double internal_pair = 0.0;
  double tie_pair = 0.0;
};

EdgeProbabilities edge_probabilities(const GeneratorSpec& spec) {
  const double s = static_cast<double>(spec.cluster_count);
  const double mc = static_cast<double>(spec.rows_per_cluster);
  const double nc = static_cast<double>(spec.cols_per_cluster);
  const double lambda = spec.expected_internal_edges;
  const double gamma = spec.expected_tie_edges;
  EdgeProbabilities p;
  // 0/0 cases (single-column clusters, single cluster) have no candidates.
  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  switch (spec.kind) {
    case MatrixKind::symmetric:
      // Each sampled pair {i,j} yields two internal entries.
      p.internal_pair = ratio(lambda, nc * (nc - 1.0));
      p.internal_core = p.internal_pair;
      p.tie_pair = ratio(gamma, (s - 1.0) * nc * nc);
      p.tie = p.tie_pair;
      break;
    case MatrixKind::nonsymmetric:
      p.internal_core = ratio(lambda, mc * (nc - 1.0));
      p.tie = ratio(gamma, (s - 1.0) * mc * nc);
      break;
    case MatrixKind::rectangular:
      // Every row, core or extra, carries lambda/m_c internal and gamma/m_c tie
      // entries in expectation.
      p.internal_core = ratio(lambda / mc, nc - 1.0);
      p.internal_extra = ratio(lambda / mc, nc);
      p.tie = ratio(gamma / mc, (s - 1.0) * nc);
      break;
  }
  return p;
}

// Row-wise sparse accumulator used while sampling.
class SparseRows {
 public:
  explicit SparseRows(std::size_t rows) : rows_(rows) {}

  void set(std::size_t row, std::size_t col, double value) { rows_[row][col] = value; }
  bool has(std::size_t row, std::size_t col) const { return rows_[row].count(col) != 0; }
  const std::map<std::size_t, double>& row(std::size_t r) const { return rows_[r]; }
  std::map<std::size_t, double>& row(std::size_t r) { return rows_[r]; }
  std::size_t size() const { return rows_.size(); }

 private:
  std::vector<std::map<std::size_t, double>> rows_;
};

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  bool bernoulli(double p) { return p > 0.0 && unit_(rng_) < p; }

  // Uniform on (0, 1): zero would not create an edge.
  double coefficient() {
    double w = 0.0;
    while (w == 0.0) w = unit_(rng_);
    return w;
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

class InstanceBuilder {
 public:
  InstanceBuilder(const GeneratorSpec& spec)
      : spec_(spec),
        p_(edge_probabilities(spec)),
        sampler_(spec.seed),
        s_(spec.cluster_count),
        mc_(spec.rows_per_cluster),
        nc_(spec.cols_per_cluster),
        h_(s_ * mc_) {}

  GeneratedModel build() {
    if (spec_.kind == MatrixKind::symmetric) {
      sample_symmetric();
    } else {
      sample_general();
    }
    repair_empty_rows();
    if (spec_.kind != MatrixKind::symmetric) repair_underdetermined_columns();
    apply_dominant_diagonal();
    return finish();
  }

 private:
  std::size_t row_index(std::size_t cluster, std::size_t local) const { return cluster * mc_ + local; }
  std::size_t col_index(std::size_t cluster, std::size_t local) const { return cluster * nc_ + local; }
  bool is_core_row(std::size_t row) const { return row % mc_ < nc_; }

  void sample_symmetric() {
    for (std::size_t c = 0; c < s_; ++c) {
      for (std::size_t i = 0; i < nc_; ++i) {
        for (std::size_t j = i + 1; j < nc_; ++j) {
          if (sampler_.bernoulli(p_.internal_pair)) set_mirrored(row_index(c, i), col_index(c, j));
        }
      }
    }
    for (std::size_t a = 0; a < s_; ++a) {
      for (std::size_t b = a + 1; b < s_; ++b) {
        for (std::size_t r = 0; r < nc_; ++r) {
          for (std::size_t k = 0; k < nc_; ++k) {
            if (sampler_.bernoulli(p_.tie_pair)) set_mirrored(row_index(a, r), col_index(b, k));
          }
        }
      }
    }
  }

  // H is square in this branch so row and column indices coincide.
  void set_mirrored(std::size_t i, std::size_t j) {
    const double w = sampler_.coefficient();
    h_.set(i, j, w);
    h_.set(j, i, w);
  }

  void sample_general() {
    for (std::size_t c = 0; c < s_; ++c) {
      for (std::size_t r = 0; r < mc_; ++r) sample_row(c, r, /*internal=*/true, /*tie=*/true);
    }
  }

  void sample_row(std::size_t c, std::size_t r, bool internal, bool tie) {
    const std::size_t row = row_index(c, r);
    if (internal) {
      const bool core = r < nc_;
      const double p = core ? p_.internal_core : p_.internal_extra;
      for (std::size_t k = 0; k < nc_; ++k) {
        if (core && k == r) continue;
        if (sampler_.bernoulli(p)) h_.set(row, col_index(c, k), sampler_.coefficient());
      }
    }
    if (tie) {
      for (std::size_t b = 0; b < s_; ++b) {
        if (b == c) continue;
        for (std::size_t k = 0; k < nc_; ++k) {
          if (sampler_.bernoulli(p_.tie)) h_.set(row, col_index(b, k), sampler_.coefficient());
        }
      }
    }
  }

  // A row becomes empty only when it drew no off-diagonal entry and no
  // diagonal will be added (delta = 0, or a rectangular extra row).
  void repair_empty_rows() {
    for (std::size_t row = 0; row < h_.size(); ++row) {
      const bool gets_diagonal = is_core_row(row) && spec_.diagonal_increment > 0.0;
      if (gets_diagonal) continue;
      const std::size_t c = row / mc_;
      const std::size_t r = row % mc_;
      int attempt = 0;
      while (h_.row(row).empty()) {
        if (++attempt > kMaxRowRetries) {
          throw ValidationError("generator: row " + std::to_string(row) + " remained empty after " +
                                std::to_string(kMaxRowRetries) + " resamples; increase edge density");
        }
        if (spec_.kind == MatrixKind::symmetric) {
          for (std::size_t j = 0; j < nc_; ++j) {
            if (j != r && sampler_.bernoulli(p_.internal_pair)) set_mirrored(row, col_index(c, j));
          }
        } else {
          sample_row(c, r, true, r >= nc_);
        }
      }
    }
  }

  // A variable whose only neighbour is a branch factor cannot send a proper
  // variable-to-factor message. Square cores give every column a diagonal
  // entry, so this happens when column j has no off-diagonal entry while the
  // diagonal row j is a branch row.
  void repair_underdetermined_columns() {
    const std::size_t n = s_ * nc_;
    std::vector<std::size_t> column_count(n, 0);
    auto recount = [&] {
      std::fill(column_count.begin(), column_count.end(), 0);
      for (std::size_t row = 0; row < h_.size(); ++row) {
        for (const auto& [col, value] : h_.row(row)) ++column_count[col];
      }
    };
    recount();
    for (std::size_t col = 0; col < n; ++col) {
      const std::size_t c = col / nc_;
      const std::size_t k = col % nc_;
      const std::size_t diag_row = row_index(c, k);
      int attempt = 0;
      while (column_count[col] == 0 && !h_.row(diag_row).empty()) {
        if (++attempt > kMaxRowRetries) {
          throw ValidationError("generator: column " + std::to_string(col) +
                                " stays attached to a single branch factor after " +
                                std::to_string(kMaxRowRetries) + " resamples");
        }
        for (std::size_t r = 0; r < mc_; ++r) {
          const bool core = r < nc_;
          if (core && r == k) continue;
          const double p = core ? p_.internal_core : p_.internal_extra;
          if (sampler_.bernoulli(p)) h_.set(row_index(c, r), col, sampler_.coefficient());
        }
        recount();
      }
    }
  }

  void apply_dominant_diagonal() {
    for (std::size_t c = 0; c < s_; ++c) {
      for (std::size_t r = 0; r < std::min(mc_, nc_); ++r) {
        const std::size_t row = row_index(c, r);
        double sum = 0.0;
        for (const auto& [col, value] : h_.row(row)) sum += value;
        const double diagonal = sum + spec_.diagonal_increment;
        if (diagonal != 0.0) h_.set(row, col_index(c, r), diagonal);
      }
    }
  }

  GeneratedModel finish() {
    const std::size_t m = s_ * mc_;
    const std::size_t n = s_ * nc_;
    std::vector<Entry> entries;
    std::vector<double> variances(m);
    std::vector<std::size_t> home(m);
    for (std::size_t row = 0; row < m; ++row) {
      for (const auto& [col, value] : h_.row(row)) entries.push_back({row, col, value});
      variances[row] = is_core_row(row) ? spec_.variances.independent : spec_.variances.dependent;
      home[row] = row / mc_;
    }
    std::vector<double> state = draw_state(n, sampler_.rng());
    std::vector<double> z = synthesise_observations(entries, m, state, variances, sampler_.rng());
    std::vector<std::size_t> sizes(s_, nc_);
    return GeneratedModel{LinearModel(m, n, std::move(entries), std::move(z), std::move(variances)),
                          ClusterPartition::contiguous(sizes), std::move(home), std::move(state)};
  }

  const GeneratorSpec& spec_;
  EdgeProbabilities p_;
  Sampler sampler_;
  std::size_t s_, mc_, nc_;
  SparseRows h_;
};

}  // namespace

void GeneratorSpec::validate() const {
  auto fail = [](const std::string& msg) { throw ValidationError("generator spec: " + msg); };
  if (cluster_count < 1) fail("cluster_count must be >= 1");
  if (rows_per_cluster < 1 || cols_per_cluster < 1) fail("cluster dimensions must be >= 1");
  if (kind == MatrixKind::rectangular) {
    if (rows_per_cluster <= cols_per_cluster) {
      fail("rectangular kind requires rows_per_cluster > cols_per_cluster (got " +
           std::to_string(rows_per_cluster) + " <= " + std::to_string(cols_per_cluster) + ")");
    }
  } else if (rows_per_cluster != cols_per_cluster) {
    fail(to_string(kind) + " kind requires rows_per_cluster == cols_per_cluster");
  }
  if (!(expected_internal_edges >= 0.0) || !std::isfinite(expected_internal_edges)) {
    fail("expected_internal_edges must be finite and >= 0");
  }
  if (!(expected_tie_edges >= 0.0) || !std::isfinite(expected_tie_edges)) {
    fail("expected_tie_edges must be finite and >= 0");
  }
  const double mc = static_cast<double>(rows_per_cluster);
  const double nc = static_cast<double>(cols_per_cluster);
  if (expected_internal_edges > mc * nc) fail("expected_internal_edges exceeds m_c * n_c");
  if (expected_tie_edges > mc * nc * static_cast<double>(cluster_count - 1)) {
    fail("expected_tie_edges exceeds m_c * n_c * (s - 1)");
  }
  const EdgeProbabilities p = edge_probabilities(*this);
  for (double q : {p.internal_core, p.internal_extra, p.tie, p.internal_pair, p.tie_pair}) {
    if (q > 1.0) fail("expected edge count exceeds the number of candidate positions");
  }
  if (expected_internal_edges > 0.0 && cols_per_cluster == 1 && kind != MatrixKind::rectangular) {
    fail("a single-column cluster has no off-diagonal internal positions");
  }
  if (expected_tie_edges > 0.0 && cluster_count == 1) fail("tie edges require >= 2 clusters");
  if (!(diagonal_increment >= 0.0) || !std::isfinite(diagonal_increment)) {
    fail("diagonal_increment must be finite and >= 0");
  }
  for (double v : {variances.independent, variances.dependent}) {
    if (!(v > 0.0) || !std::isfinite(v)) fail("variances must be positive and finite");
  }
}

GeneratedModel generate_model(const GeneratorSpec& spec) {
  spec.validate();
  return InstanceBuilder(spec).build();
}

std::vector<double> draw_state(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> x(n);
  for (double& xi : x) xi = unit(rng);
  return x;
}

std::vector<double> synthesise_observations(const std::vector<Entry>& entries, std::size_t rows,
                                            const std::vector<double>& state,
                                            const std::vector<double>& variances,
                                            std::mt19937_64& rng) {
  std::vector<double> z(rows, 0.0);
  for (const Entry& e : entries) z.at(e.row) += e.value * state.at(e.col);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < rows; ++i) z[i] += std::sqrt(variances.at(i)) * noise(rng);
  return z;
}

namespace {

struct BlockDims {
  std::vector<Eigen::Index> rows, cols;
  std::vector<std::size_t> row_offset, col_offset;
};

BlockDims block_dims(const ClusteredBlocks& blocks) {
  const std::size_t s = blocks.blocks.size();
  if (s == 0) throw ValidationError("clustered blocks: no clusters");
  BlockDims d;
  std::size_t row_acc = 0, col_acc = 0;
  for (std::size_t i = 0; i < s; ++i) {
    if (blocks.blocks[i].size() != s) {
      throw ValidationError("clustered blocks: block row " + std::to_string(i) + " has " +
                            std::to_string(blocks.blocks[i].size()) + " blocks, expected " +
                            std::to_string(s));
    }
    const Eigen::MatrixXd& diag = blocks.blocks[i][i];
    if (diag.rows() == 0 || diag.cols() == 0) {
      throw ValidationError("clustered blocks: internal block (" + std::to_string(i) + "," +
                            std::to_string(i) + ") is empty");
    }
    d.rows.push_back(diag.rows());
    d.cols.push_back(diag.cols());
    d.row_offset.push_back(row_acc);
    d.col_offset.push_back(col_acc);
    row_acc += static_cast<std::size_t>(diag.rows());
    col_acc += static_cast<std::size_t>(diag.cols());
  }
  return d;
}

}  // namespace

LinearModel assemble_global(const ClusteredBlocks& blocks) {
  const BlockDims d = block_dims(blocks);
  const std::size_t s = d.rows.size();
  const std::size_t m = d.row_offset.back() + static_cast<std::size_t>(d.rows.back());
  const std::size_t n = d.col_offset.back() + static_cast<std::size_t>(d.cols.back());

  std::vector<Entry> entries;
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      const Eigen::MatrixXd& b = blocks.blocks[i][j];
      if (i != j && b.size() == 0) continue;
      if (b.rows() != d.rows[i] || b.cols() != d.cols[j]) {
        std::ostringstream msg;
        msg << "clustered blocks: block (" << i << "," << j << ") is " << b.rows() << "x"
            << b.cols() << ", expected " << d.rows[i] << "x" << d.cols[j];
        throw ValidationError(msg.str());
      }
      for (Eigen::Index r = 0; r < b.rows(); ++r) {
        for (Eigen::Index k = 0; k < b.cols(); ++k) {
          if (b(r, k) != 0.0) {
            entries.push_back({d.row_offset[i] + static_cast<std::size_t>(r),
                               d.col_offset[j] + static_cast<std::size_t>(k), b(r, k)});
          }
        }
      }
    }
  }

  std::vector<double> z(m, 0.0), v(m, 1.0);
  auto copy_vector = [&](const std::vector<Eigen::VectorXd>& src, std::vector<double>& dst,
                         const char* what) {
    if (src.empty()) return;
    if (src.size() != s) {
      throw ValidationError(std::string("clustered blocks: expected one ") + what +
                            " vector per cluster");
    }
    for (std::size_t i = 0; i < s; ++i) {
      if (src[i].size() != d.rows[i]) {
        throw ValidationError(std::string("clustered blocks: ") + what + " vector of cluster " +
                              std::to_string(i) + " has length " + std::to_string(src[i].size()) +
                              ", expected " + std::to_string(d.rows[i]));
      }
      for (Eigen::Index r = 0; r < src[i].size(); ++r) dst[d.row_offset[i] + static_cast<std::size_t>(r)] = src[i](r);
    }
  };
  copy_vector(blocks.observations, z, "observation");
  copy_vector(blocks.variances, v, "variance");
  return LinearModel(m, n, std::move(entries), std::move(z), std::move(v));
}

ClusterPartition block_partition(const ClusteredBlocks& blocks) {
  const BlockDims d = block_dims(blocks);
  std::vector<std::size_t> sizes;
  for (Eigen::Index c : d.cols) sizes.push_back(static_cast<std::size_t>(c));
  return ClusterPartition::contiguous(sizes);
}

}  // namespace agbp
