#include "agbp/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "agbp/error.hpp"

namespace agbp {

namespace {
constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
}

FactorGraph build_factor_graph(const LinearModel& model) {
  FactorGraph g;
  const std::size_t m = model.rows();
  const std::size_t n = model.cols();
  const auto& entries = model.entries();

  g.observation_ = model.observations();
  g.variance_ = model.variances();
  g.factor_offsets_.assign(m + 1, 0);
  g.edge_variable_.reserve(entries.size());
  g.edge_factor_.reserve(entries.size());
  g.edge_coefficient_.reserve(entries.size());
  // Entries are sorted by (row, col), which is exactly the edge order.
  for (const Entry& e : entries) {
    ++g.factor_offsets_[e.row + 1];
    g.edge_variable_.push_back(e.col);
    g.edge_factor_.push_back(e.row);
    g.edge_coefficient_.push_back(e.value);
  }
  for (std::size_t i = 0; i < m; ++i) g.factor_offsets_[i + 1] += g.factor_offsets_[i];

  g.variable_offsets_.assign(n + 1, 0);
  for (std::size_t col : g.edge_variable_) ++g.variable_offsets_[col + 1];
  for (std::size_t j = 0; j < n; ++j) g.variable_offsets_[j + 1] += g.variable_offsets_[j];
  g.variable_edge_list_.resize(entries.size());
  std::vector<std::size_t> cursor(g.variable_offsets_.begin(), g.variable_offsets_.end() - 1);
  for (std::size_t e = 0; e < g.edge_variable_.size(); ++e) {
    g.variable_edge_list_[cursor[g.edge_variable_[e]]++] = e;
  }

  for (std::size_t i = 0; i < m; ++i) {
    if (g.is_branch(i)) {
      ++g.branch_count_;
      for (std::size_t e = g.edge_begin(i); e < g.edge_end(i); ++e) g.branch_edges_.push_back(e);
    }
  }

  for (std::size_t j = 0; j < n; ++j) {
    const auto edges = g.variable_edges(j);
    if (edges.empty()) {
      throw ValidationError("factor graph: variable " + std::to_string(j) +
                            " is not observed by any factor");
    }
    if (edges.size() == 1 && g.is_branch(g.edge_factor(edges[0]))) {
      throw ValidationError("factor graph: underdetermined variable " + std::to_string(j) +
                            ": its only factor " + std::to_string(g.edge_factor(edges[0])) +
                            " is a branch factor");
    }
  }
  return g;
}

void FactorGraph::set_observation(std::size_t factor, double z, double v) {
  if (factor >= factor_count()) {
    throw ValidationError("factor graph: unknown factor " + std::to_string(factor));
  }
  if (!std::isfinite(z) || !(v > 0.0) || !std::isfinite(v)) {
    throw ValidationError("factor graph: factor " + std::to_string(factor) +
                          " needs a finite observation and a positive finite variance");
  }
  observation_[factor] = z;
  variance_[factor] = v;
}

void FactorGraph::set_virtual_prior(double mean, double variance) {
  if (!std::isfinite(mean) || !(variance > 0.0)) {
    throw ValidationError("factor graph: virtual prior needs a finite mean and a positive variance");
  }
  prior_mean_ = mean;
  prior_precision_ = 1.0 / variance;
}

LinearModel FactorGraph::to_model() const {
  std::vector<Entry> entries;
  entries.reserve(edge_count());
  for (std::size_t e = 0; e < edge_count(); ++e) {
    entries.push_back({edge_factor_[e], edge_variable_[e], edge_coefficient_[e]});
  }
  return LinearModel(factor_count(), variable_count(), std::move(entries), observation_, variance_);
}

std::size_t FactorClassification::tie_count() const {
  return static_cast<std::size_t>(std::count(kind.begin(), kind.end(), FactorKind::tie));
}

std::vector<std::size_t> FactorClassification::tie_factors() const {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < kind.size(); ++f) {
    if (kind[f] == FactorKind::tie) out.push_back(f);
  }
  return out;
}

FactorClassification classify_factors(const FactorGraph& graph, const ClusterPartition& partition,
                                      std::span<const std::size_t> row_home) {
  if (partition.variable_count() != graph.variable_count()) {
    throw ValidationError("classify: partition covers " + std::to_string(partition.variable_count()) +
                          " variables, graph has " + std::to_string(graph.variable_count()));
  }
  if (!row_home.empty() && row_home.size() != graph.factor_count()) {
    throw ValidationError("classify: row_home must have one entry per factor");
  }
  const std::size_t s = partition.cluster_count();
  FactorClassification c;
  c.cluster_count = s;
  c.kind.resize(graph.factor_count());
  c.home_cluster.resize(graph.factor_count());
  c.internal_edges.assign(s, 0);
  c.tie_edges.assign(s, 0);

  std::vector<std::size_t> votes(s, 0);
  for (std::size_t f = 0; f < graph.factor_count(); ++f) {
    std::fill(votes.begin(), votes.end(), 0);
    std::size_t distinct = 0;
    for (std::size_t e = graph.edge_begin(f); e < graph.edge_end(f); ++e) {
      if (votes[partition.cluster_of(graph.edge_variable(e))]++ == 0) ++distinct;
    }
    c.kind[f] = distinct >= 2 ? FactorKind::tie : FactorKind::internal;
    std::size_t home;
    if (!row_home.empty()) {
      home = row_home[f];
      if (home >= s) throw ValidationError("classify: row_home entry outside cluster range");
    } else {
      home = static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    }
    c.home_cluster[f] = home;
    for (std::size_t e = graph.edge_begin(f); e < graph.edge_end(f); ++e) {
      if (partition.cluster_of(graph.edge_variable(e)) == home) {
        ++c.internal_edges[home];
      } else {
        ++c.tie_edges[home];
      }
    }
  }
  return c;
}

const Gaussian& FreezeView::frozen_message(std::size_t edge) const {
  const std::size_t k = snapshot_index_.at(edge);
  if (k == npos) throw ValidationError("freeze view: edge " + std::to_string(edge) + " is not frozen");
  return snapshot_[k].message;
}

std::size_t FreezeView::effective_branch_count() const {
  return active_ ? graph_->branch_count() - classification_->tie_count() : graph_->branch_count();
}

std::size_t FreezeView::effective_leaf_count() const {
  return active_ ? graph_->leaf_count() + snapshot_.size() : graph_->leaf_count();
}

FreezeView freeze_tie_factors(const FactorGraph& graph, const FactorClassification& classification,
                              const MessageState& messages) {
  if (classification.kind.size() != graph.factor_count()) {
    throw ValidationError("freeze: classification does not match the graph");
  }
  if (messages.edge_count() != graph.edge_count()) {
    throw ValidationError("freeze: message state has " + std::to_string(messages.edge_count()) +
                          " edges, graph has " + std::to_string(graph.edge_count()));
  }
  FreezeView view;
  view.graph_ = &graph;
  view.classification_ = &classification;
  view.snapshot_index_.assign(graph.edge_count(), npos);
  for (std::size_t f = 0; f < graph.factor_count(); ++f) {
    if (!classification.is_tie(f)) continue;
    for (std::size_t e = graph.edge_begin(f); e < graph.edge_end(f); ++e) {
      const Gaussian msg = messages.f2x(e);
      if (!std::isfinite(msg.mean) || !std::isfinite(msg.variance) || !(msg.variance > 0.0)) {
        throw ValidationError("freeze: missing message on tie edge " + std::to_string(e) +
                              " (factor " + std::to_string(f) + ")");
      }
      view.snapshot_index_[e] = view.snapshot_.size();
      view.snapshot_.push_back({e, msg});
    }
  }
  view.active_ = true;
  return view;
}

const FactorGraph& defreeze(FreezeView& view) {
  view.active_ = false;
  return *view.graph_;
}

}  // namespace agbp
