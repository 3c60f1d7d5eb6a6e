#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "agbp/graph.hpp"
#include "agbp/messages.hpp"
#include "agbp/scheduler.hpp"

namespace agbp {

enum class GrowthKind : std::uint8_t { logarithmic, exponential, linear };

std::string to_string(GrowthKind kind);
GrowthKind growth_kind_from_string(const std::string& name);

/// Three-phase variance aging of one observation received at `arrival`:
/// constant until `hold_until`, growing until `saturate_at`, then `ceiling`.
/// Build through the factories so that ceiling and saturation agree.
struct AgingModel {
  GrowthKind kind = GrowthKind::logarithmic;
  double alpha = 1.0;
  double beta = 0.0;
  double base_variance = 1.0;
  double arrival = 0.0;
  double hold_until = 0.0;
  double saturate_at = 0.0;
  double ceiling = 1.0;

  /// Ceiling derived as the growth curve evaluated at `saturate_at`.
  static AgingModel with_saturation(GrowthKind kind, double alpha, double beta, double base_variance,
                                    double arrival, double hold_until, double saturate_at);
  /// Saturation time solved in closed form from `ceiling`.
  static AgingModel with_ceiling(GrowthKind kind, double alpha, double beta, double base_variance,
                                 double arrival, double hold_until, double ceiling);

  /// Unclamped phase-two curve at time t.
  double growth(double t) const;
  /// Same model moved to a new arrival time with a new base variance.
  AgingModel restarted(double new_arrival, double new_base_variance) const;
  void validate() const;
};

/// Variance of the aged observation at time t. Throws for t < arrival.
double variance_at(const AgingModel& model, double t);

struct ObservationEvent {
  double time = 0.0;
  std::size_t factor = 0;
  double observation = 0.0;
  double variance = 1.0;
};

/// Replaces (z, v) of the event's factor. Returns the new constant message
/// when the factor is a leaf. Structure is untouched.
std::optional<Gaussian> apply_event(FactorGraph& graph, const ObservationEvent& event);

/// Rewrites the stored leaf messages of `state` from the graph's current
/// observations; branch messages are kept (warm start).
void refresh_leaf_messages(const FactorGraph& graph, MessageState& state);

/// Resamples each observation with probability p_z as z_i = h_i x' + u_i,
/// with a fresh state x' ~ U[0,1)^n and u_i ~ N(0, v_i). Returns the changed
/// factor ids in ascending order.
std::vector<std::size_t> perturb_observations(FactorGraph& graph, double p_z, std::mt19937_64& rng);

/// CSV `time,factor,z,v`; rows must be sorted by time.
std::vector<ObservationEvent> load_events(const std::filesystem::path& path);

/// Aging attached to one factor; restarted whenever an event hits the factor.
struct AgingAssignment {
  std::size_t factor = 0;
  AgingModel model;
};

struct DynamicConfig {
  Schedule schedule = Schedule::alternating(1, 0);
  RunConfig run;
  std::vector<ObservationEvent> events;
  std::vector<AgingAssignment> aging;
  /// Extra checkpoint times at which only aging is re-evaluated.
  std::vector<double> checkpoints;
};

/// Runs to convergence, then for every distinct event/checkpoint time applies
/// the events, refreshes aged variances, and continues from the warm message
/// state. When `run.oracle` is set it is recomputed for each interval. One
/// RunResult per interval, the first being the cold start.
std::vector<RunResult> run_dynamic(FactorGraph& graph, const FactorClassification& classification,
                                   const DynamicConfig& config);

}  // namespace agbp
