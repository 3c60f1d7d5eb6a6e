#include "agbp/engine.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

#include "agbp/error.hpp"
#include "agbp/io.hpp"

namespace agbp {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

Gaussian leaf_message(double coefficient, double observation, double variance) {
  return {observation / coefficient, variance / (coefficient * coefficient)};
}

Gaussian combine_messages(std::span<const Gaussian> incoming) {
  if (incoming.empty()) {
    throw ValidationError("underdetermined variable: no incoming messages to combine");
  }
  double precision = 0.0;
  double weighted = 0.0;
  for (const Gaussian& g : incoming) {
    precision += 1.0 / g.variance;
    weighted += g.mean / g.variance;
  }
  const double variance = 1.0 / precision;
  return {weighted * variance, variance};
}

Gaussian factor_message(double observation, double variance, double target,
                        std::span<const std::pair<double, Gaussian>> others) {
  double mean_acc = observation;
  double var_acc = variance;
  for (const auto& [h, msg] : others) {
    mean_acc -= h * msg.mean;
    var_acc += h * h * msg.variance;
  }
  return {mean_acc / target, var_acc / (target * target)};
}

void DampingConfig::validate() const {
  if (!(weight > 0.0 && weight < 1.0)) {
    throw ValidationError("damping: weight must lie in (0, 1)");
  }
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw ValidationError("damping: probability must lie in [0, 1]");
  }
}

RandomizedDamping::RandomizedDamping(const FactorGraph& graph, const DampingConfig& config)
    : graph_(&graph), config_(config), rng_(config.seed), mask_(graph.edge_count(), 0) {
  config_.validate();
  sample();
}

bool RandomizedDamping::applies_to(bool local_iteration) const {
  switch (config_.scope) {
    case DampingScope::all: return true;
    case DampingScope::global_only: return !local_iteration;
    case DampingScope::local_only: return local_iteration;
  }
  return true;
}

void RandomizedDamping::sample() {
  std::bernoulli_distribution draw(config_.probability);
  for (std::size_t e : graph_->branch_edges()) mask_[e] = draw(rng_) ? 1 : 0;
}

void RandomizedDamping::advance() {
  if (config_.mode == MaskMode::per_iteration) sample();
}

MessageState init_messages(const FactorGraph& graph, double prior_mean, double prior_variance) {
  if (!(prior_variance > 0.0) || !std::isfinite(prior_variance)) {
    throw ValidationError("init_messages: prior variance must be positive and finite");
  }
  if (!std::isfinite(prior_mean)) throw ValidationError("init_messages: prior mean must be finite");
  const std::size_t edges = graph.edge_count();
  MessageState s;
  s.f2x_mean.assign(edges, prior_mean);
  s.f2x_variance.assign(edges, prior_variance);
  s.x2f_mean.assign(edges, kNaN);
  s.x2f_variance.assign(edges, kNaN);
  for (std::size_t f = 0; f < graph.factor_count(); ++f) {
    if (!graph.is_leaf(f)) continue;
    const std::size_t e = graph.edge_begin(f);
    const Gaussian leaf = leaf_message(graph.coefficient(e), graph.observation(f), graph.variance(f));
    s.f2x_mean[e] = leaf.mean;
    s.f2x_variance[e] = leaf.variance;
  }
  return s;
}

namespace {

// x_j -> f message over `edge`, reading the f2x arrays of `in`.
inline Gaussian variable_message(const FactorGraph& graph, const MessageState& in, std::size_t edge) {
  const std::size_t variable = graph.edge_variable(edge);
  double precision = graph.prior_precision();
  double weighted = precision * graph.prior_mean();
  bool any = precision > 0.0;
  for (std::size_t other : graph.variable_edges(variable)) {
    if (other == edge) continue;
    const double inv = 1.0 / in.f2x_variance[other];
    precision += inv;
    weighted += in.f2x_mean[other] * inv;
    any = true;
  }
  if (!any) {
    throw ValidationError("underdetermined variable " + std::to_string(variable) +
                          ": factor " + std::to_string(graph.edge_factor(edge)) +
                          " is its only neighbour");
  }
  const double variance = 1.0 / precision;
  return {weighted * variance, variance};
}

// f -> x_j message over `edge`, reading the x2f arrays of `src`.
inline Gaussian branch_message(const FactorGraph& graph, const MessageState& src, std::size_t edge) {
  const std::size_t f = graph.edge_factor(edge);
  double mean_acc = graph.observation(f);
  double var_acc = graph.variance(f);
  for (std::size_t other = graph.edge_begin(f); other < graph.edge_end(f); ++other) {
    if (other == edge) continue;
    const double h = graph.coefficient(other);
    mean_acc -= h * src.x2f_mean[other];
    var_acc += h * h * src.x2f_variance[other];
  }
  const double h = graph.coefficient(edge);
  return {mean_acc / h, var_acc / (h * h)};
}

}  // namespace

Gaussian variable_to_factor(const FactorGraph& graph, const MessageState& state, std::size_t edge) {
  if (edge >= graph.edge_count()) throw ValidationError("variable_to_factor: edge out of range");
  return variable_message(graph, state, edge);
}

Gaussian factor_to_variable(const FactorGraph& graph, const MessageState& state, std::size_t edge) {
  if (edge >= graph.edge_count()) throw ValidationError("factor_to_variable: edge out of range");
  const std::size_t f = graph.edge_factor(edge);
  if (graph.is_leaf(f)) return leaf_message(graph.coefficient(edge), graph.observation(f), graph.variance(f));
  if (!state.has_x2f) throw ValidationError("factor_to_variable: variable-to-factor messages not computed yet");
  return branch_message(graph, state, edge);
}

Marginals compute_marginals(const FactorGraph& graph, const MessageState& state) {
  const std::size_t n = graph.variable_count();
  Marginals out{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t j = 0; j < n; ++j) {
    double precision = graph.prior_precision();
    double weighted = precision * graph.prior_mean();
    for (std::size_t e : graph.variable_edges(j)) {
      const double inv = 1.0 / state.f2x_variance[e];
      precision += inv;
      weighted += state.f2x_mean[e] * inv;
    }
    out.variance[j] = 1.0 / precision;
    out.mean[j] = weighted * out.variance[j];
  }
  return out;
}

void iterate(const FactorGraph& graph, const FreezeView* view, const MessageState& in,
             MessageState& out, RandomizedDamping* damping) {
  const std::size_t edges = graph.edge_count();
  if (in.edge_count() != edges) throw ValidationError("iterate: message state does not match graph");
  if (view != nullptr && &view->graph() != &graph) {
    throw ValidationError("iterate: freeze view belongs to another graph");
  }
  const bool local = view != nullptr && view->active();
  out.f2x_mean.resize(edges);
  out.f2x_variance.resize(edges);
  out.x2f_mean.resize(edges);
  out.x2f_variance.resize(edges);

  // Exclusion sums use prefix and suffix accumulators rather than
  // total-minus-self, which would cancel when precisions span many decades.
  thread_local std::vector<double> suffix_a;
  thread_local std::vector<double> suffix_b;

  // First half: every variable-to-branch-factor message from the old f2x.
  for (std::size_t j = 0; j < graph.variable_count(); ++j) {
    const std::span<const std::size_t> es = graph.variable_edges(j);
    const std::size_t k = es.size();
    suffix_a.assign(k + 1, 0.0);
    suffix_b.assign(k + 1, 0.0);
    for (std::size_t t = k; t-- > 0;) {
      const double inv = 1.0 / in.f2x_variance[es[t]];
      suffix_a[t] = suffix_a[t + 1] + inv;
      suffix_b[t] = suffix_b[t + 1] + in.f2x_mean[es[t]] * inv;
    }
    double pre_a = graph.prior_precision();
    double pre_b = pre_a * graph.prior_mean();
    for (std::size_t t = 0; t < k; ++t) {
      const std::size_t e = es[t];
      if (graph.is_leaf(graph.edge_factor(e))) {
        out.x2f_mean[e] = kNaN;
        out.x2f_variance[e] = kNaN;
      } else {
        const double precision = pre_a + suffix_a[t + 1];
        if (!(precision > 0.0)) (void)variable_message(graph, in, e);  // throws the diagnostic
        const double variance = 1.0 / precision;
        out.x2f_mean[e] = (pre_b + suffix_b[t + 1]) * variance;
        out.x2f_variance[e] = variance;
      }
      const double inv = 1.0 / in.f2x_variance[e];
      pre_a += inv;
      pre_b += in.f2x_mean[e] * inv;
    }
  }

  // Second half: factor-to-variable messages from the new x2f.
  const bool damp = damping != nullptr && damping->applies_to(local);
  for (std::size_t f = 0; f < graph.factor_count(); ++f) {
    const std::size_t begin = graph.edge_begin(f);
    const std::size_t end = graph.edge_end(f);
    if (graph.is_leaf(f)) {
      const Gaussian leaf = leaf_message(graph.coefficient(begin), graph.observation(f), graph.variance(f));
      out.f2x_mean[begin] = leaf.mean;
      out.f2x_variance[begin] = leaf.variance;
      continue;
    }
    if (local && view->frozen(f)) {
      for (std::size_t e = begin; e < end; ++e) {
        const Gaussian& frozen = view->frozen_message(e);
        out.f2x_mean[e] = frozen.mean;
        out.f2x_variance[e] = frozen.variance;
      }
      continue;
    }
    const std::size_t k = end - begin;
    suffix_a.assign(k + 1, 0.0);
    suffix_b.assign(k + 1, 0.0);
    for (std::size_t t = k; t-- > 0;) {
      const std::size_t e = begin + t;
      const double h = graph.coefficient(e);
      suffix_a[t] = suffix_a[t + 1] + h * out.x2f_mean[e];
      suffix_b[t] = suffix_b[t + 1] + h * h * out.x2f_variance[e];
    }
    double pre_a = 0.0;
    double pre_b = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
      const std::size_t e = begin + t;
      const double h = graph.coefficient(e);
      const double mean = (graph.observation(f) - (pre_a + suffix_a[t + 1])) / h;
      out.f2x_mean[e] = damp ? damping->apply(e, in.f2x_mean[e], mean) : mean;
      out.f2x_variance[e] = (graph.variance(f) + (pre_b + suffix_b[t + 1])) / (h * h);
      pre_a += h * out.x2f_mean[e];
      pre_b += h * h * out.x2f_variance[e];
    }
  }
  out.iteration = in.iteration + 1;
  out.has_x2f = true;
  if (damping != nullptr) damping->advance();
}

MessageState global_iteration(const FactorGraph& graph, const MessageState& state,
                              RandomizedDamping* damping) {
  MessageState out;
  iterate(graph, nullptr, state, out, damping);
  return out;
}

MessageState local_iteration(const FreezeView& view, const MessageState& state,
                             RandomizedDamping* damping) {
  if (!view.active()) throw ValidationError("local_iteration: freeze view is not active");
  MessageState out;
  iterate(view.graph(), &view, state, out, damping);
  return out;
}

void validate_state(const FactorGraph& graph, const MessageState& state) {
  const std::size_t edges = graph.edge_count();
  if (state.f2x_mean.size() != edges || state.f2x_variance.size() != edges ||
      state.x2f_mean.size() != edges || state.x2f_variance.size() != edges) {
    throw ValidationError("message state: arrays do not match the " + std::to_string(edges) +
                          " graph edges");
  }
  auto good = [](double mean, double var) {
    return std::isfinite(mean) && std::isfinite(var) && var > 0.0;
  };
  for (std::size_t e = 0; e < edges; ++e) {
    if (!good(state.f2x_mean[e], state.f2x_variance[e])) {
      throw ValidationError("message state: invalid f2x message on edge " + std::to_string(e));
    }
    const bool branch = graph.is_branch(graph.edge_factor(e));
    if (state.has_x2f && branch && !good(state.x2f_mean[e], state.x2f_variance[e])) {
      throw ValidationError("message state: invalid x2f message on edge " + std::to_string(e));
    }
    if (!branch && !std::isnan(state.x2f_mean[e])) {
      throw ValidationError("message state: leaf edge " + std::to_string(e) + " carries an x2f message");
    }
  }
}

void write_trace_header(std::ostream& out) {
  out << "iteration,edge_kind,factor,variable,mean,variance\n";
}

void write_trace(std::ostream& out, const FactorGraph& graph, const MessageState& state) {
  for (std::size_t e = 0; e < graph.edge_count(); ++e) {
    out << state.iteration << ",f2x," << graph.edge_factor(e) << ',' << graph.edge_variable(e) << ','
        << format_double(state.f2x_mean[e]) << ',' << format_double(state.f2x_variance[e]) << '\n';
  }
  if (!state.has_x2f) return;
  for (std::size_t e : graph.branch_edges()) {
    out << state.iteration << ",x2f," << graph.edge_factor(e) << ',' << graph.edge_variable(e) << ','
        << format_double(state.x2f_mean[e]) << ',' << format_double(state.x2f_variance[e]) << '\n';
  }
}

}  // namespace agbp
