#include <benchmark/benchmark.h>

#include "agbp/analysis.hpp"
#include "agbp/engine.hpp"
#include "agbp/graph.hpp"
#include "agbp/scheduler.hpp"

namespace {

agbp::GeneratedModel instance(std::size_t rows_per_cluster) {
  agbp::GeneratorSpec spec;
  spec.cluster_count = 2;
  spec.rows_per_cluster = spec.cols_per_cluster = rows_per_cluster;
  spec.expected_internal_edges = 6.0 * double(rows_per_cluster);
  spec.expected_tie_edges = 5.0;
  spec.seed = 1;
  return agbp::generate_model(spec);
}

void BM_GlobalIteration(benchmark::State& state) {
  const auto gen = instance(std::size_t(state.range(0)));
  const auto graph = agbp::build_factor_graph(gen.model);
  agbp::MessageState a = agbp::init_messages(graph), b;
  for (auto _ : state) {
    agbp::iterate(graph, nullptr, a, b, nullptr);
    std::swap(a, b);
    benchmark::DoNotOptimize(a.f2x_mean.data());
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(graph.edge_count()));
}
BENCHMARK(BM_GlobalIteration)->RangeMultiplier(4)->Range(25, 1600);

void BM_LocalIteration(benchmark::State& state) {
  const auto gen = instance(std::size_t(state.range(0)));
  const auto graph = agbp::build_factor_graph(gen.model);
  const auto cls = agbp::classify_factors(graph, gen.partition, gen.row_home);
  agbp::MessageState a = agbp::global_iteration(graph, agbp::init_messages(graph)), b;
  const auto view = agbp::freeze_tie_factors(graph, cls, a);
  for (auto _ : state) {
    agbp::iterate(graph, &view, a, b, nullptr);
    std::swap(a, b);
    benchmark::DoNotOptimize(a.f2x_mean.data());
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(graph.edge_count()));
}
BENCHMARK(BM_LocalIteration)->RangeMultiplier(4)->Range(25, 1600);

void BM_DampedIteration(benchmark::State& state) {
  const auto gen = instance(std::size_t(state.range(0)));
  const auto graph = agbp::build_factor_graph(gen.model);
  agbp::RandomizedDamping damping(graph, agbp::DampingConfig{});
  agbp::MessageState a = agbp::init_messages(graph), b;
  for (auto _ : state) {
    agbp::iterate(graph, nullptr, a, b, &damping);
    std::swap(a, b);
    benchmark::DoNotOptimize(a.f2x_mean.data());
  }
}
BENCHMARK(BM_DampedIteration)->Arg(100)->Arg(400);

void BM_RunAlternating(benchmark::State& state) {
  const auto gen = instance(100);
  const auto graph = agbp::build_factor_graph(gen.model);
  const auto cls = agbp::classify_factors(graph, gen.partition, gen.row_home);
  agbp::RunConfig rc;
  rc.oracle = agbp::wls_solve(gen.model);
  const auto schedule = agbp::Schedule::alternating(1, std::size_t(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(agbp::run_alternating(graph, cls, schedule, rc).nu);
}
BENCHMARK(BM_RunAlternating)->Arg(1)->Arg(30)->Unit(benchmark::kMillisecond);

void BM_SpectralRadius(benchmark::State& state) {
  const auto gen = instance(std::size_t(state.range(0)));
  const auto graph = agbp::build_factor_graph(gen.model);
  const auto d = agbp::decompose(graph);
  for (auto _ : state) benchmark::DoNotOptimize(agbp::spectral_radius(d.omega));
}
BENCHMARK(BM_SpectralRadius)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
