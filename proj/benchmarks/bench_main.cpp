#include <benchmark/benchmark.h>

#include "mtd/graph.hpp"
#include "mtd/hungarian.hpp"
#include "mtd/loss.hpp"
#include "mtd/model.hpp"
#include "mtd/rng.hpp"
#include "mtd/synth.hpp"

using namespace mtd;

namespace {

Tensor random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  Tensor t(Shape{r, c});
  for (auto& v : t.data()) v = rng.normal();
  return t;
}

void BM_MatmulForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = random_matrix(rng, n, n), b = random_matrix(rng, n, n);
  for (auto _ : state) {
    Tape tape;
    const Var x = tape.leaf(a), y = tape.leaf(b);
    tape.backward(sum(matmul(x, y)));
    Tensor g = tape.grad(x);
    benchmark::DoNotOptimize(g);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_MatmulForwardBackward)->Arg(16)->Arg(64)->Arg(256);

void BM_Hungarian(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  CostMatrix c(n, n + 1);
  for (auto& v : c.values) v = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(hungarian_match(c, 0.5).total_cost);
}
BENCHMARK(BM_Hungarian)->Arg(4)->Arg(16)->Arg(64);

void BM_Simulate(benchmark::State& state) {
  GeneratorConfig g;
  g.min_objects = g.max_objects = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(simulate(g, seed++).tracks.size());
}
BENCHMARK(BM_Simulate)->Arg(3)->Arg(6);

// One training sample: forward over the whole sequence graph, multi-task
// loss and backward.
void BM_ModelStep(benchmark::State& state) {
  GeneratorConfig g;
  g.min_objects = g.max_objects = static_cast<std::size_t>(state.range(1));
  const auto seq = generate_sequence(g, 0, 0, feature_projection(g, 0)).sequence;
  ModelConfig c;
  c.kind = state.range(0) == 0 ? ModelKind::mtd_gnn : ModelKind::baseline_rnn;
  c.input_dim = g.feature_dim;
  c.max_nodes = 8;
  c.relations = generated_relations();
  const Model m = Model::init(c, 0);
  const Adjacency adj = Adjacency::from_graph(seq.graph);
  for (auto _ : state) {
    Tape tape;
    const BoundParams p(tape, m.params);
    const auto preds = run_model(tape, seq.graph, adj, p, c);
    tape.backward(total_loss(tape, preds, seq.targets, c.relations));
    benchmark::DoNotOptimize(p.gradients());
  }
  state.SetLabel(c.kind == ModelKind::mtd_gnn ? "mtd-gnn" : "baseline-rnn");
}
BENCHMARK(BM_ModelStep)->Args({0, 3})->Args({0, 6})->Args({1, 3})->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
