#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "agbp/graph.hpp"
#include "agbp/messages.hpp"

namespace agbp {

/// Default prior of branch factor-to-variable messages before iteration 1.
inline constexpr double kDefaultPriorMean = 0.0;
inline constexpr double kDefaultPriorVariance = 1e3;

// ---------------------------------------------------------------------------
// Message primitives. These are the closed-form Gaussian updates; the graph
// level functions below only gather their inputs.

/// Constant message of a leaf factor h x = z with variance v: (z/h, v/h^2).
Gaussian leaf_message(double coefficient, double observation, double variance);

/// Product of Gaussian messages: precision-weighted mean, summed precision.
/// Throws ValidationError on an empty input (underdetermined variable).
Gaussian combine_messages(std::span<const Gaussian> incoming);

/// Factor-to-variable message of the row z = sum_k h_k x_k + u, u ~ N(0, v),
/// towards the variable with coefficient `target`, given (h_b, message) for
/// every other variable of the row.
Gaussian factor_message(double observation, double variance, double target,
                        std::span<const std::pair<double, Gaussian>> others);

// ---------------------------------------------------------------------------

enum class MaskMode : std::uint8_t {
  fixed,          // q sampled once per edge for the whole run
  per_iteration,  // q resampled before every iteration
};

/// Which iterations the damping applies to.
enum class DampingScope : std::uint8_t { all, global_only, local_only };

struct DampingConfig {
  double weight = 0.9;       // zeta: weight of the previous mean
  double probability = 0.9;  // p: chance that an edge is damped
  std::uint64_t seed = 0;
  MaskMode mode = MaskMode::fixed;
  DampingScope scope = DampingScope::all;

  void validate() const;
};

/// Convex mix of current and previous mean when q is set; variances are
/// never damped.
inline double apply_damping(bool q, double weight, double previous, double current) {
  return q ? (1.0 - weight) * current + weight * previous : current;
}

/// Randomised damping state of one run: one Bernoulli(p) bit per
/// branch-factor edge (leaf edges are never damped).
class RandomizedDamping {
 public:
  RandomizedDamping(const FactorGraph& graph, const DampingConfig& config);

  const DampingConfig& config() const noexcept { return config_; }
  bool masked(std::size_t edge) const { return mask_[edge] != 0; }
  const std::vector<std::uint8_t>& mask() const noexcept { return mask_; }
  bool applies_to(bool local_iteration) const;

  double apply(std::size_t edge, double previous, double current) const {
    return apply_damping(masked(edge), config_.weight, previous, current);
  }

  /// Called once per iteration; redraws the mask in per-iteration mode.
  void advance();

 private:
  void sample();

  const FactorGraph* graph_;
  DampingConfig config_;
  std::mt19937_64 rng_;
  std::vector<std::uint8_t> mask_;
};

/// Branch factor-to-variable messages set to the prior, leaf messages to
/// their constants, x2f slots left unset.
MessageState init_messages(const FactorGraph& graph, double prior_mean = kDefaultPriorMean,
                           double prior_variance = kDefaultPriorVariance);

/// Message x_j -> f_i over edge (f_i, x_j) from the f2x messages of `state`.
Gaussian variable_to_factor(const FactorGraph& graph, const MessageState& state, std::size_t edge);

/// Message f_i -> x_j over edge (f_i, x_j) from the x2f messages of `state`.
/// For a leaf factor this is its constant message.
Gaussian factor_to_variable(const FactorGraph& graph, const MessageState& state, std::size_t edge);

struct Marginals {
  std::vector<double> mean;
  std::vector<double> variance;
};

Marginals compute_marginals(const FactorGraph& graph, const MessageState& state);

/// One synchronous iteration over the whole graph. Both half-iterations read
/// only the previous snapshot (Jacobi order), so the result does not depend on
/// traversal order.
MessageState global_iteration(const FactorGraph& graph, const MessageState& state,
                              RandomizedDamping* damping = nullptr);

/// One intra-cluster iteration: as global_iteration, but tie factors emit
/// their frozen snapshot messages instead of recomputing them.
MessageState local_iteration(const FreezeView& view, const MessageState& state,
                             RandomizedDamping* damping = nullptr);

/// Allocation-free form used by the schedulers: writes the successor of `in`
/// into `out`. `view` may be null (global iteration) or an active view.
void iterate(const FactorGraph& graph, const FreezeView* view, const MessageState& in,
             MessageState& out, RandomizedDamping* damping);

/// Throws ValidationError unless `state` matches the graph's edge set and
/// every present variance is positive and finite.
void validate_state(const FactorGraph& graph, const MessageState& state);

/// Appends CSV rows `iteration,edge_kind,factor,variable,mean,variance` for
/// every message of `state` (edge_kind is f2x or x2f).
void write_trace(std::ostream& out, const FactorGraph& graph, const MessageState& state);
void write_trace_header(std::ostream& out);

}  // namespace agbp
