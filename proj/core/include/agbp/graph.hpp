#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "agbp/messages.hpp"
#include "agbp/model.hpp"

namespace agbp {

/// Variance of the virtual prior N(0, v) attached to every variable node.
inline constexpr double kVirtualPriorVariance = 1e60;

/// Bipartite factor graph of a linear model: factor f_i per row of H,
/// variable x_j per column, an edge wherever h_ij != 0.
///
/// Edges are numbered factor-major with variables ascending inside a factor,
/// i.e. lexicographically by (factor, variable). The structure never changes
/// after construction; only (z_i, v_i) of a factor may be replaced.
class FactorGraph {
 public:
  FactorGraph() = default;

  std::size_t variable_count() const noexcept { return variable_offsets_.empty() ? 0 : variable_offsets_.size() - 1; }
  std::size_t factor_count() const noexcept { return observation_.size(); }
  std::size_t edge_count() const noexcept { return edge_variable_.size(); }

  std::size_t edge_begin(std::size_t factor) const { return factor_offsets_[factor]; }
  std::size_t edge_end(std::size_t factor) const { return factor_offsets_[factor + 1]; }
  std::size_t degree(std::size_t factor) const { return edge_end(factor) - edge_begin(factor); }
  bool is_leaf(std::size_t factor) const { return degree(factor) == 1; }
  bool is_branch(std::size_t factor) const { return degree(factor) > 1; }

  std::size_t edge_variable(std::size_t edge) const { return edge_variable_[edge]; }
  std::size_t edge_factor(std::size_t edge) const { return edge_factor_[edge]; }
  double coefficient(std::size_t edge) const { return edge_coefficient_[edge]; }

  /// Edge ids incident to variable x_j, ordered by factor id.
  std::span<const std::size_t> variable_edges(std::size_t variable) const {
    return {variable_edge_list_.data() + variable_offsets_[variable],
            variable_offsets_[variable + 1] - variable_offsets_[variable]};
  }

  double observation(std::size_t factor) const { return observation_[factor]; }
  double variance(std::size_t factor) const { return variance_[factor]; }
  void set_observation(std::size_t factor, double z, double v);

  std::size_t branch_count() const noexcept { return branch_count_; }
  std::size_t leaf_count() const noexcept { return factor_count() - branch_count_; }
  /// Edges of branch factors in edge-id order; the coordinate layout of m_f.
  const std::vector<std::size_t>& branch_edges() const noexcept { return branch_edges_; }

  /// Weak prior N(mean, variance) multiplied into every variable node. It keeps
  /// message variances finite on square cores without leaf factors; an
  /// infinite variance removes it.
  void set_virtual_prior(double mean, double variance);
  double prior_mean() const noexcept { return prior_mean_; }
  double prior_precision() const noexcept { return prior_precision_; }

  /// Rebuilds the linear model with the current observations and variances.
  LinearModel to_model() const;

  friend FactorGraph build_factor_graph(const LinearModel& model);
  friend bool operator==(const FactorGraph&, const FactorGraph&) = default;

 private:
  std::vector<std::size_t> factor_offsets_;
  std::vector<std::size_t> edge_variable_;
  std::vector<std::size_t> edge_factor_;
  std::vector<double> edge_coefficient_;
  std::vector<std::size_t> variable_offsets_;
  std::vector<std::size_t> variable_edge_list_;
  std::vector<double> observation_;
  std::vector<double> variance_;
  std::vector<std::size_t> branch_edges_;
  std::size_t branch_count_ = 0;
  double prior_mean_ = 0.0;
  double prior_precision_ = 1.0 / kVirtualPriorVariance;
};

/// Builds the factor graph. Throws ValidationError for a variable with no
/// factor, or whose only factor is a branch factor (underdetermined).
FactorGraph build_factor_graph(const LinearModel& model);

enum class FactorKind : std::uint8_t { internal, tie };

/// Internal/tie split of the factors under a cluster partition, with the
/// per-cluster internal (lambda) and tie (gamma) edge counts.
///
/// Edges are attributed to the factor's home cluster: an edge to a variable of
/// the home cluster counts towards lambda, any other edge towards gamma.
struct FactorClassification {
  std::size_t cluster_count = 0;
  std::vector<FactorKind> kind;
  std::vector<std::size_t> home_cluster;
  std::vector<std::size_t> internal_edges;
  std::vector<std::size_t> tie_edges;

  bool is_tie(std::size_t factor) const { return kind[factor] == FactorKind::tie; }
  std::size_t tie_count() const;
  std::size_t internal_count() const { return kind.size() - tie_count(); }
  std::vector<std::size_t> tie_factors() const;

  friend bool operator==(const FactorClassification&, const FactorClassification&) = default;
};

/// Classifies every factor. `row_home` gives the block row each factor came
/// from; when empty, the home cluster is the majority cluster among the
/// factor's variables (ties to the lowest cluster id).
FactorClassification classify_factors(const FactorGraph& graph, const ClusterPartition& partition,
                                      std::span<const std::size_t> row_home = {});

/// Local-iteration view of a graph: tie factors are collapsed into deg(f)
/// leaf factors whose messages are frozen at the snapshot.
class FreezeView {
 public:
  struct FrozenMessage {
    std::size_t edge;
    Gaussian message;
  };

  const FactorGraph& graph() const noexcept { return *graph_; }
  const FactorClassification& classification() const noexcept { return *classification_; }
  bool active() const noexcept { return active_; }

  /// True for factors whose outgoing messages are currently frozen.
  bool frozen(std::size_t factor) const { return active_ && classification_->is_tie(factor); }
  /// Snapshot message for an edge of a frozen factor.
  const Gaussian& frozen_message(std::size_t edge) const;
  const std::vector<FrozenMessage>& snapshot() const noexcept { return snapshot_; }

  /// b - g while active, b otherwise.
  std::size_t effective_branch_count() const;
  /// l + e while active, l otherwise.
  std::size_t effective_leaf_count() const;

 private:
  friend FreezeView freeze_tie_factors(const FactorGraph&, const FactorClassification&,
                                       const MessageState&);
  friend const FactorGraph& defreeze(FreezeView& view);

  const FactorGraph* graph_ = nullptr;
  const FactorClassification* classification_ = nullptr;
  std::vector<FrozenMessage> snapshot_;
  std::vector<std::size_t> snapshot_index_;  // per edge; npos unless frozen
  bool active_ = false;
};

/// Snapshots the current tie-factor messages. The graph and classification
/// must outlive the view. Throws ValidationError if a tie edge has no valid
/// message in `messages`.
FreezeView freeze_tie_factors(const FactorGraph& graph, const FactorClassification& classification,
                              const MessageState& messages);

/// Restores branch semantics for tie factors. Idempotent.
const FactorGraph& defreeze(FreezeView& view);

}  // namespace agbp
