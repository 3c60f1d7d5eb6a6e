#include "agbp/scheduler.hpp"

#include <algorithm>
#include <cmath>

#include "agbp/error.hpp"

namespace agbp {

void Schedule::validate() const {
  if (kind == ScheduleKind::alternating && nu_g < 1) {
    throw ValidationError("schedule: alternating runs need nu_g >= 1");
  }
}

std::string Schedule::describe() const {
  if (kind == ScheduleKind::synchronous) return "synchronous";
  return "alternating(nu_g=" + std::to_string(nu_g) + ",nu_l=" + std::to_string(nu_l) + "," +
         (order == SequenceOrder::global_first ? "global-first" : "local-first") + ")";
}

void RunConfig::validate() const {
  if (!(tolerance > 0.0)) throw ValidationError("run: tolerance must be positive");
  if (max_iterations == 0) throw ValidationError("run: max_iterations must be at least 1");
  if (max_sequences == 0) throw ValidationError("run: max_sequences must be at least 1");
  if (!(divergence_threshold > 0.0)) throw ValidationError("run: divergence threshold must be positive");
  if (damping) damping->validate();
}

double rmse(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw ValidationError("rmse: length mismatch (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  }
  if (a.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(a.size()));
}

namespace {

double max_change(const std::vector<double>& before, const std::vector<double>& after) {
  double worst = 0.0;
  for (std::size_t e = 0; e < before.size(); ++e) {
    const double d = std::abs(after[e] - before[e]);
    if (!(d <= worst)) worst = d;  // NaN propagates
  }
  return worst;
}

// Convergence and divergence bookkeeping shared by both schedulers. Both
// tests look at the marginal estimate: messages on edges that carry almost
// no information may hold means of any magnitude without affecting it.
class Monitor {
 public:
  Monitor(const FactorGraph& graph, const RunConfig& config, RunResult& result,
          const MessageState& state)
      : graph_(graph), config_(config), result_(result) {
    if (config.oracle && config.oracle->size() != graph.variable_count()) {
      throw ValidationError("run: oracle has " + std::to_string(config.oracle->size()) +
                            " entries, graph has " + std::to_string(graph.variable_count()) +
                            " variables");
    }
    estimate_ = compute_marginals(graph, state).mean;
  }

  // Records the state after one iteration; returns the estimate change.
  double observe(const MessageState& state) {
    std::vector<double> next = compute_marginals(graph_, state).mean;
    const double change = max_change(estimate_, next);
    estimate_ = std::move(next);
    result_.residual_history.push_back(change);
    return change;
  }

  bool diverged(const MessageState& state) const {
    for (double m : state.f2x_mean) {
      if (!std::isfinite(m)) return true;
    }
    for (double v : state.f2x_variance) {
      if (!std::isfinite(v) || !(v > 0.0)) return true;
    }
    for (double x : estimate_) {
      if (!std::isfinite(x) || std::abs(x) > config_.divergence_threshold) return true;
    }
    return false;
  }

  const std::vector<double>& estimate() const { return estimate_; }

  // Checkpoint test; `residual` is the estimate change since the previous checkpoint.
  bool converged(double residual) {
    if (config_.oracle) {
      const double err = rmse(estimate_, *config_.oracle);
      result_.rmse_history.push_back(err);
      return err <= config_.tolerance;
    }
    return residual <= config_.tolerance;
  }

  // True if `state` already sits at the tolerance before any counted work.
  bool converged_initially(const MessageState& state) {
    double residual = 0.0;
    if (!config_.oracle) {
      MessageState probe;
      iterate(graph_, nullptr, state, probe, nullptr);
      residual = max_change(estimate_, compute_marginals(graph_, probe).mean);
    }
    return converged(residual);
  }

  void finish(const MessageState& state) {
    Marginals marg = compute_marginals(graph_, state);
    result_.estimate = std::move(marg.mean);
    result_.variances = std::move(marg.variance);
  }

 private:
  const FactorGraph& graph_;
  const RunConfig& config_;
  RunResult& result_;
  std::vector<double> estimate_;
};

}  // namespace

RunResult run_synchronous(const FactorGraph& graph, const RunConfig& config) {
  MessageState state = init_messages(graph, config.prior_mean, config.prior_variance);
  return run_synchronous(graph, state, config);
}

RunResult run_synchronous(const FactorGraph& graph, MessageState& state, const RunConfig& config) {
  config.validate();
  validate_state(graph, state);
  RunResult result;
  Monitor monitor(graph, config, result, state);
  std::optional<RandomizedDamping> damping;
  if (config.damping) damping.emplace(graph, *config.damping);

  if (config.check_initial && monitor.converged_initially(state)) {
    result.converged = true;
    monitor.finish(state);
    return result;
  }
  MessageState next;
  for (std::size_t k = 0; k < config.max_iterations; ++k) {
    iterate(graph, nullptr, state, next, damping ? &*damping : nullptr);
    std::swap(state, next);
    ++result.nu;
    const double residual = monitor.observe(state);
    if (monitor.diverged(state)) {
      result.diverged = true;
      break;
    }
    if (monitor.converged(residual)) {
      result.converged = true;
      break;
    }
  }
  monitor.finish(state);
  return result;
}

RunResult run_alternating(const FactorGraph& graph, const ClusterPartition& partition,
                          const Schedule& schedule, const RunConfig& config) {
  const FactorClassification classification = classify_factors(graph, partition);
  return run_alternating(graph, classification, schedule, config);
}

RunResult run_alternating(const FactorGraph& graph, const FactorClassification& classification,
                          const Schedule& schedule, const RunConfig& config) {
  MessageState state = init_messages(graph, config.prior_mean, config.prior_variance);
  return run_alternating(graph, classification, schedule, state, config);
}

RunResult run_alternating(const FactorGraph& graph, const FactorClassification& classification,
                          const Schedule& schedule, MessageState& state, const RunConfig& config) {
  if (schedule.kind != ScheduleKind::alternating) {
    throw ValidationError("run_alternating: schedule is not alternating");
  }
  schedule.validate();
  config.validate();
  validate_state(graph, state);
  if (classification.kind.size() != graph.factor_count()) {
    throw ValidationError("run_alternating: classification does not match the graph");
  }
  RunResult result;
  result.nu_g = schedule.nu_g;
  result.nu_l = schedule.nu_l;
  Monitor monitor(graph, config, result, state);
  std::optional<RandomizedDamping> damping;
  if (config.damping) damping.emplace(graph, *config.damping);
  RandomizedDamping* damp = damping ? &*damping : nullptr;

  if (config.check_initial && monitor.converged_initially(state)) {
    result.converged = true;
    monitor.finish(state);
    return result;
  }

  MessageState next;
  bool blown = false;
  auto step = [&](const FreezeView* view) {
    iterate(graph, view, state, next, damp);
    std::swap(state, next);
    ++result.nu;
    monitor.observe(state);
    blown = monitor.diverged(state);
  };
  auto global_phase = [&] {
    for (std::size_t k = 0; k < schedule.nu_g && !blown; ++k) step(nullptr);
  };
  auto local_phase = [&] {
    if (schedule.nu_l == 0 || blown) return;
    FreezeView view = freeze_tie_factors(graph, classification, state);
    for (std::size_t k = 0; k < schedule.nu_l && !blown; ++k) step(&view);
    defreeze(view);
  };

  std::vector<double> start;
  for (std::size_t s = 0; s < config.max_sequences; ++s) {
    start = monitor.estimate();
    if (schedule.order == SequenceOrder::global_first) {
      global_phase();
      local_phase();
    } else {
      local_phase();
      global_phase();
    }
    ++result.nu_s;
    if (blown) {
      result.diverged = true;
      break;
    }
    const double residual = max_change(start, monitor.estimate());
    if (monitor.converged(residual)) {
      result.converged = true;
      break;
    }
  }
  monitor.finish(state);
  return result;
}

RunResult run_schedule(const FactorGraph& graph, const FactorClassification& classification,
                       const Schedule& schedule, MessageState& state, const RunConfig& config) {
  if (schedule.kind == ScheduleKind::synchronous) return run_synchronous(graph, state, config);
  return run_alternating(graph, classification, schedule, state, config);
}

nlohmann::json run_summary_json(const RunResult& result, const Schedule& schedule,
                                std::uint64_t seed) {
  nlohmann::json j;
  j["converged"] = result.converged;
  j["diverged"] = result.diverged;
  j["nu"] = result.nu;
  j["nu_s"] = result.nu_s;
  j["nu_g"] = result.nu_g;
  j["nu_l"] = result.nu_l;
  const double r = result.final_rmse();
  j["rmse_final"] = std::isfinite(r) ? nlohmann::json(r) : nlohmann::json(nullptr);
  j["seed"] = seed;
  j["schedule"] = schedule.describe();
  return j;
}

}  // namespace agbp
