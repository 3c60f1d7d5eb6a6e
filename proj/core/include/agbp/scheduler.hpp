#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agbp/engine.hpp"
#include "agbp/graph.hpp"

namespace agbp {

enum class ScheduleKind : std::uint8_t { synchronous, alternating };
enum class SequenceOrder : std::uint8_t { global_first, local_first };

/// Message schedule. For alternating runs one sequence is nu_g global
/// iterations followed by nu_l local ones (or the reverse).
struct Schedule {
  ScheduleKind kind = ScheduleKind::synchronous;
  std::size_t nu_g = 1;
  std::size_t nu_l = 0;
  SequenceOrder order = SequenceOrder::global_first;

  static Schedule synchronous() { return {}; }
  static Schedule alternating(std::size_t nu_g, std::size_t nu_l,
                              SequenceOrder order = SequenceOrder::global_first) {
    return {ScheduleKind::alternating, nu_g, nu_l, order};
  }

  void validate() const;
  std::string describe() const;
};

inline constexpr std::size_t kDefaultMaxIterations = 100000;
inline constexpr std::size_t kDefaultMaxSequences = 10000;
inline constexpr double kDefaultTolerance = 1e-5;
inline constexpr double kDivergenceThreshold = 1e15;

struct RunConfig {
  std::size_t max_iterations = kDefaultMaxIterations;  // synchronous bound
  std::size_t max_sequences = kDefaultMaxSequences;    // alternating bound
  double tolerance = kDefaultTolerance;
  /// When set, convergence means RMSE(estimate, oracle) <= tolerance;
  /// otherwise the largest change of the marginal means must drop to the
  /// tolerance (per iteration, or per sequence when alternating).
  std::optional<std::vector<double>> oracle;
  std::optional<DampingConfig> damping;
  double prior_mean = kDefaultPriorMean;
  double prior_variance = kDefaultPriorVariance;
  /// Test the incoming state before the first iteration, so a warm start
  /// that is already converged reports zero iterations.
  bool check_initial = false;
  double divergence_threshold = kDivergenceThreshold;

  void validate() const;
};

struct RunResult {
  bool converged = false;
  bool diverged = false;
  std::size_t nu = 0;    // iterations executed (nu_s * (nu_g + nu_l) when alternating)
  std::size_t nu_s = 0;  // sequences executed; 0 for synchronous runs
  std::size_t nu_g = 0;
  std::size_t nu_l = 0;
  std::vector<double> estimate;
  std::vector<double> variances;
  /// RMSE against the oracle at each checkpoint (empty without an oracle).
  std::vector<double> rmse_history;
  /// Largest absolute change of the marginal means in each iteration.
  std::vector<double> residual_history;

  double final_rmse() const {
    return rmse_history.empty() ? std::numeric_limits<double>::quiet_NaN() : rmse_history.back();
  }
};

/// sqrt(sum (a_i - b_i)^2 / n). Throws ValidationError on a length mismatch.
double rmse(const std::vector<double>& a, const std::vector<double>& b);

/// Runs from init_messages(graph, prior).
RunResult run_synchronous(const FactorGraph& graph, const RunConfig& config);
/// Continues from `state`, which holds the final messages on return.
RunResult run_synchronous(const FactorGraph& graph, MessageState& state, const RunConfig& config);

RunResult run_alternating(const FactorGraph& graph, const ClusterPartition& partition,
                          const Schedule& schedule, const RunConfig& config);
RunResult run_alternating(const FactorGraph& graph, const FactorClassification& classification,
                          const Schedule& schedule, const RunConfig& config);
RunResult run_alternating(const FactorGraph& graph, const FactorClassification& classification,
                          const Schedule& schedule, MessageState& state, const RunConfig& config);

/// Dispatches on schedule.kind; `classification` is ignored for synchronous runs.
RunResult run_schedule(const FactorGraph& graph, const FactorClassification& classification,
                       const Schedule& schedule, MessageState& state, const RunConfig& config);

/// {converged, diverged, nu, nu_s, nu_g, nu_l, rmse_final, seed, schedule}.
nlohmann::json run_summary_json(const RunResult& result, const Schedule& schedule,
                                std::uint64_t seed);

}  // namespace agbp
