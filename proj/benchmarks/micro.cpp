#include <benchmark/benchmark.h>

#include "jigsaw/agent.hpp"
#include "jigsaw/baselines.hpp"

using namespace jigsaw;

namespace {

void BM_AggregateEvidence(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const BoardShape shape{n, n};
  const auto spec = PuzzleSpec::blank(shape);
  OracleModel model(shape, 8, 0.1, 1);
  const auto w = EvidenceWeights::uniform(shape);
  Rng rng(1);
  const auto p = random_permutation(n * n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(aggregate_evidence(p.placement(), spec, model, w).aggregate);
}
BENCHMARK(BM_AggregateEvidence)->Arg(4)->Arg(8)->Arg(16);

void BM_EvolveAction(benchmark::State& state) {
  const BoardShape shape{4, 4};
  const auto spec = PuzzleSpec::blank(shape);
  OracleModel model(shape, 8, 0.1, 1);
  Rng rng(2);
  const ValueFunction value{Mlp::glorot({feature_count(shape), 64, 1}, rng), 20.0, {}};
  EvoConfig cfg;
  cfg.population = static_cast<int>(state.range(0));
  const auto p = random_permutation(16, rng);
  std::vector<Action> parents;
  for (int i = 0; i < cfg.population; ++i) parents.push_back(random_action(shape, rng));
  for (auto _ : state) {
    EvidenceEvaluator ev(spec, model, EvidenceWeights::uniform(shape));
    PerceivedContext ctx(ev, {});
    benchmark::DoNotOptimize(evolve_action(parents, p.placement(), ctx, value, 0.998, cfg, rng).score);
  }
}
BENCHMARK(BM_EvolveAction)->Arg(16)->Arg(64);

void BM_GaGenerations(benchmark::State& state) {
  const BoardShape shape{4, 4};
  const auto spec = PuzzleSpec::blank(shape);
  OracleModel model(shape, 8, 0.1, 1);
  Rng rng(3);
  const auto p = random_permutation(16, rng);
  GaConfig cfg;
  cfg.generations = 10;
  for (auto _ : state)
    benchmark::DoNotOptimize(ga_solve(spec, p, model, EvidenceWeights::uniform(shape), cfg).evaluations);
}
BENCHMARK(BM_GaGenerations);

}  // namespace

BENCHMARK_MAIN();
