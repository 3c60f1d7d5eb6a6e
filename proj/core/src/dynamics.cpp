#include "agbp/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "agbp/analysis.hpp"
#include "agbp/engine.hpp"
#include "agbp/error.hpp"

namespace agbp {

std::string to_string(GrowthKind kind) {
  switch (kind) {
    case GrowthKind::logarithmic: return "logarithmic";
    case GrowthKind::exponential: return "exponential";
    case GrowthKind::linear: return "linear";
  }
  return "unknown";
}

GrowthKind growth_kind_from_string(const std::string& name) {
  if (name == "logarithmic" || name == "log") return GrowthKind::logarithmic;
  if (name == "exponential" || name == "exp") return GrowthKind::exponential;
  if (name == "linear") return GrowthKind::linear;
  throw ValidationError("unknown growth kind '" + name + "'");
}

double AgingModel::growth(double t) const {
  const double dt = t - hold_until;
  switch (kind) {
    case GrowthKind::logarithmic: return alpha * std::log((dt + 1.0 + beta) / (1.0 + beta)) + base_variance;
    case GrowthKind::exponential: return base_variance * std::pow(1.0 + beta, alpha * dt);
    case GrowthKind::linear: return alpha * dt + base_variance;
  }
  return base_variance;
}

void AgingModel::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ValidationError("aging: alpha must be positive");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ValidationError("aging: beta must be non-negative");
  if (!(base_variance > 0.0) || !std::isfinite(base_variance)) {
    throw ValidationError("aging: base variance must be positive");
  }
  if (!(arrival <= hold_until && hold_until <= saturate_at) || !std::isfinite(saturate_at)) {
    throw ValidationError("aging: need arrival <= hold_until <= saturate_at");
  }
  if (!(ceiling >= base_variance) || !std::isfinite(ceiling)) {
    throw ValidationError("aging: ceiling must be finite and at least the base variance");
  }
}

AgingModel AgingModel::with_saturation(GrowthKind kind, double alpha, double beta, double base_variance,
                                       double arrival, double hold_until, double saturate_at) {
  AgingModel m{kind, alpha, beta, base_variance, arrival, hold_until, saturate_at, base_variance};
  m.ceiling = std::max(base_variance, m.growth(saturate_at));
  m.validate();
  return m;
}

AgingModel AgingModel::with_ceiling(GrowthKind kind, double alpha, double beta, double base_variance,
                                    double arrival, double hold_until, double ceiling) {
  if (!(ceiling >= base_variance)) {
    throw ValidationError("aging: ceiling must be at least the base variance");
  }
  AgingModel m{kind, alpha, beta, base_variance, arrival, hold_until, hold_until, ceiling};
  const double rise = ceiling - base_variance;
  switch (kind) {
    case GrowthKind::logarithmic:
      m.saturate_at = hold_until + (1.0 + beta) * std::expm1(rise / alpha);
      break;
    case GrowthKind::exponential:
      if (rise > 0.0 && !(beta > 0.0)) {
        throw ValidationError("aging: exponential growth with beta = 0 never reaches the ceiling");
      }
      m.saturate_at = rise > 0.0 ? hold_until + std::log(ceiling / base_variance) / (alpha * std::log1p(beta))
                                 : hold_until;
      break;
    case GrowthKind::linear:
      m.saturate_at = hold_until + rise / alpha;
      break;
  }
  m.validate();
  return m;
}

AgingModel AgingModel::restarted(double new_arrival, double new_base_variance) const {
  const double shift = new_arrival - arrival;
  return with_saturation(kind, alpha, beta, new_base_variance, new_arrival, hold_until + shift,
                         saturate_at + shift);
}

double variance_at(const AgingModel& model, double t) {
  if (t < model.arrival) throw ValidationError("aging: time precedes arrival");
  if (t <= model.hold_until) return model.base_variance;
  if (t >= model.saturate_at) return model.ceiling;
  return std::clamp(model.growth(t), model.base_variance, model.ceiling);
}

std::optional<Gaussian> apply_event(FactorGraph& graph, const ObservationEvent& event) {
  if (event.factor >= graph.factor_count()) {
    throw ValidationError("event: unknown factor " + std::to_string(event.factor));
  }
  graph.set_observation(event.factor, event.observation, event.variance);
  if (!graph.is_leaf(event.factor)) return std::nullopt;
  return leaf_message(graph.coefficient(graph.edge_begin(event.factor)), event.observation,
                      event.variance);
}

void refresh_leaf_messages(const FactorGraph& graph, MessageState& state) {
  if (state.edge_count() != graph.edge_count()) {
    throw ValidationError("refresh: message state does not match graph");
  }
  for (std::size_t f = 0; f < graph.factor_count(); ++f) {
    if (!graph.is_leaf(f)) continue;
    const std::size_t e = graph.edge_begin(f);
    const Gaussian g = leaf_message(graph.coefficient(e), graph.observation(f), graph.variance(f));
    state.f2x_mean[e] = g.mean;
    state.f2x_variance[e] = g.variance;
  }
}

std::vector<std::size_t> perturb_observations(FactorGraph& graph, double p_z, std::mt19937_64& rng) {
  if (!(p_z >= 0.0 && p_z <= 1.0)) throw ValidationError("perturb: p_z must lie in [0, 1]");
  const std::vector<double> state = draw_state(graph.variable_count(), rng);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<std::size_t> changed;
  for (std::size_t f = 0; f < graph.factor_count(); ++f) {
    if (!(coin(rng) < p_z)) continue;
    double z = 0.0;
    for (std::size_t e = graph.edge_begin(f); e < graph.edge_end(f); ++e) {
      z += graph.coefficient(e) * state[graph.edge_variable(e)];
    }
    std::normal_distribution<double> noise(0.0, std::sqrt(graph.variance(f)));
    graph.set_observation(f, z + noise(rng), graph.variance(f));
    changed.push_back(f);
  }
  return changed;
}

std::vector<RunResult> run_dynamic(FactorGraph& graph, const FactorClassification& classification,
                                   const DynamicConfig& config) {
  config.schedule.validate();
  for (std::size_t k = 1; k < config.events.size(); ++k) {
    if (config.events[k].time < config.events[k - 1].time) {
      throw ValidationError("dynamic: events must be sorted by time");
    }
  }
  std::map<std::size_t, AgingModel> aging;
  for (const AgingAssignment& a : config.aging) {
    if (a.factor >= graph.factor_count()) {
      throw ValidationError("dynamic: aging assigned to unknown factor " + std::to_string(a.factor));
    }
    a.model.validate();
    aging.insert_or_assign(a.factor, a.model);
  }

  std::vector<double> times;
  for (const ObservationEvent& ev : config.events) times.push_back(ev.time);
  times.insert(times.end(), config.checkpoints.begin(), config.checkpoints.end());
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  RunConfig run = config.run;
  run.check_initial = false;
  MessageState state = init_messages(graph, run.prior_mean, run.prior_variance);
  std::vector<RunResult> results;
  results.push_back(run_schedule(graph, classification, config.schedule, state, run));

  std::size_t next_event = 0;
  run.check_initial = true;
  for (double t : times) {
    for (; next_event < config.events.size() && config.events[next_event].time == t; ++next_event) {
      const ObservationEvent& ev = config.events[next_event];
      apply_event(graph, ev);
      auto it = aging.find(ev.factor);
      if (it != aging.end()) it->second = it->second.restarted(t, ev.variance);
    }
    for (const auto& [factor, model] : aging) {
      if (t < model.arrival) continue;
      graph.set_observation(factor, graph.observation(factor), variance_at(model, t));
    }
    refresh_leaf_messages(graph, state);
    if (config.run.oracle) run.oracle = wls_solve(graph.to_model());
    results.push_back(run_schedule(graph, classification, config.schedule, state, run));
  }
  return results;
}

}  // namespace agbp
