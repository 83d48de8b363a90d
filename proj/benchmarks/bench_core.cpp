#include <vector>

#include <benchmark/benchmark.h>

#include "graphopt/fnn.hpp"
#include "graphopt/graph_space.hpp"
#include "graphopt/objective.hpp"
#include "graphopt/procedure.hpp"
#include "graphopt/rng.hpp"
#include "graphopt/trial_sim.hpp"

using namespace graphopt;

namespace {

Scenario scenario(std::size_t m) {
  return Scenario::from_powers(std::vector<double>(m, 0.85), exchangeable_correlation(m, 0.3));
}

Graph sample_graph(std::size_t m) {
  const ParamSpace space = ParamSpace::fully_free(m, 0.025);
  return decode(sample_uniform(space, 1, 3).front(), space);
}

void BM_RunProcedure(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const Graph g = sample_graph(m);
  const PValuePanel panel = sample_pvalues(scenario(m), 4096, 1);
  ProcedureWorkspace ws;
  std::vector<std::uint8_t> out(m);
  std::size_t i = 0;
  for (auto _ : state) {
    run_procedure_unchecked(g, panel.row(i).data(), ws, out.data());
    benchmark::DoNotOptimize(out.data());
    i = (i + 1) % panel.rows();
  }
}
BENCHMARK(BM_RunProcedure)->Arg(3)->Arg(6)->Arg(11);

void BM_EvaluateObjective(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const Graph g = sample_graph(m);
  const PValuePanel panel = sample_pvalues(scenario(m), 100000, 1);
  const ObjectiveSpec spec = ObjectiveSpec::equal_weights(m);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_objective(g, panel, spec));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(panel.rows()));
}
BENCHMARK(BM_EvaluateObjective)->Arg(3)->Arg(6)->Unit(benchmark::kMillisecond);

void BM_DecideAll(benchmark::State& state) {
  const Graph g = sample_graph(6);
  const PValuePanel panel = sample_pvalues(scenario(6), 100000, 1);
  for (auto _ : state) benchmark::DoNotOptimize(decide_all(g, panel));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(panel.rows()));
}
BENCHMARK(BM_DecideAll)->Unit(benchmark::kMillisecond);

void BM_SamplePvalues(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const Scenario s = scenario(m);
  for (auto _ : state) benchmark::DoNotOptimize(sample_pvalues(s, 100000, 1));
  state.SetItemsProcessed(state.iterations() * 100000);
}
BENCHMARK(BM_SamplePvalues)->Arg(3)->Arg(6)->Unit(benchmark::kMillisecond);

Network bench_network(std::size_t d, std::size_t width, std::size_t depth) {
  Rng rng(5);
  std::vector<DenseLayer> layers;
  std::size_t in = d;
  std::vector<std::size_t> widths(depth, width);
  widths.push_back(1);
  for (std::size_t out : widths) {
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = 0.3 * rng.normal();
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = 0.1 * rng.normal();
    layers.push_back(std::move(layer));
    in = out;
  }
  return Network({std::vector<std::size_t>(depth, width), 0.0}, std::move(layers), Standardizer::identity(d), {});
}

void BM_Forward(benchmark::State& state) {
  const Network net = bench_network(29, static_cast<std::size_t>(state.range(0)), 3);
  const std::vector<double> x(29, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(140);

void BM_ValueAndGradient(benchmark::State& state) {
  const Network net = bench_network(29, static_cast<std::size_t>(state.range(0)), 3);
  const std::vector<double> x(29, 0.1);
  std::vector<double> grad(29);
  for (auto _ : state) benchmark::DoNotOptimize(net.value_and_gradient(x, grad));
}
BENCHMARK(BM_ValueAndGradient)->Arg(32)->Arg(140);

}  // namespace

BENCHMARK_MAIN();
