#include <doctest.h>

#include <algorithm>
#include <set>

#include "jigsaw/baselines.hpp"
#include "jigsaw/dataset.hpp"
#include "jigsaw/error.hpp"
#include "oracles.hpp"

using namespace jigsaw;

namespace {

Permutation replay(Permutation p, const std::vector<Action>& actions, BoardShape shape) {
  for (const auto& a : actions) p = apply_action(p, a, shape);
  return p;
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("greedy climbs strictly and stops at a local maximum") {
  Rng rng(1);
  for (auto shape : {BoardShape{3, 3}, BoardShape{4, 4}}) {
    const auto spec = PuzzleSpec::blank(shape);
    for (std::uint64_t s = 0; s < 10; ++s) {
      OracleModel m(shape, 8, 0.1, s);
      const auto init = random_permutation(shape.cells(), rng);
      std::vector<double> trace;
      const auto res = greedy_solve(spec, init, m, EvidenceWeights::uniform(shape), {}, &trace);
      CHECK(trace.size() == res.actions.size() + 1);
      for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] > trace[i - 1]);
      CHECK(replay(init, res.actions, shape) == res.final_state);
      // no single swap improves the end state
      EvidenceEvaluator ev(spec, m, EvidenceWeights::uniform(shape));
      auto pl = res.final_state.values();
      const double e = ev.aggregate(pl);
      for (int p = 0; p < shape.cells(); ++p)
        for (int q = p + 1; q < shape.cells(); ++q) {
          std::swap(pl[p], pl[q]);
          CHECK(ev.aggregate(pl) <= e);
          std::swap(pl[p], pl[q]);
        }
    }
  }
}

TEST_CASE("greedy honours its step cap") {
  const BoardShape shape{4, 4};
  const auto spec = PuzzleSpec::blank(shape);
  OracleModel m(shape, 8, 0.0, 1);
  GreedyConfig c;
  c.max_steps = 2;
  Rng rng(3);
  const auto res = greedy_solve(spec, random_permutation(16, rng), m, EvidenceWeights::uniform(shape), c);
  CHECK(res.steps <= 2);
}

TEST_CASE("tabu solves 3x3 with the clean oracle") {
  const BoardShape shape{3, 3};
  const auto spec = PuzzleSpec::blank(shape);
  OracleModel m(shape, 8, 0.0, 1);
  int solved = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    TabuConfig c;
    c.max_iterations = 200;
    c.seed = s;
    const auto init = shuffle(spec, s);
    std::vector<double> trace;
    const auto res = tabu_solve(spec, init, m, EvidenceWeights::uniform(shape), c, &trace);
    solved += res.metrics.perfect;
    CHECK(replay(init, res.actions, shape) == res.final_state);
    CHECK(std::is_sorted(trace.begin(), trace.end()));
  }
  CHECK(solved >= 90);
}

TEST_CASE("tabu is reproducible per seed") {
  const BoardShape shape{4, 4};
  const auto spec = PuzzleSpec::blank(shape);
  OracleModel m(shape, 8, 0.1, 5);
  TabuConfig c;
  c.max_iterations = 50;
  c.seed = 8;
  const auto init = shuffle(spec, 2);
  const auto a = tabu_solve(spec, init, m, EvidenceWeights::uniform(shape), c);
  const auto b = tabu_solve(spec, init, m, EvidenceWeights::uniform(shape), c);
  CHECK(a.final_state == b.final_state);
  CHECK(a.actions == b.actions);
  CHECK_THROWS_AS((TabuConfig{0, 10, 0, 0}.validate()), ValidationError);
}

TEST_CASE("GA solves 2x3 with the clean oracle") {
  const BoardShape shape{2, 3};
  const auto spec = PuzzleSpec::blank(shape);
  OracleModel m(shape, 8, 0.0, 1);
  int solved = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    GaConfig c;
    c.population = 50;
    c.generations = 100;
    c.seed = s;
    const auto init = shuffle(spec, s + 1000);
    std::vector<double> trace;
    const auto res = ga_solve(spec, init, m, EvidenceWeights::uniform(shape), c, &trace);
    solved += res.metrics.perfect;
    CHECK(replay(init, res.actions, shape) == res.final_state);
    CHECK(trace.size() == 100);
    // elitism keeps the best fitness from falling
    CHECK(std::is_sorted(trace.begin(), trace.end()));
  }
  CHECK(solved >= 95);
}

TEST_CASE("GA stops on the evaluation budget") {
  const BoardShape shape{4, 4};
  const auto spec = PuzzleSpec::blank(shape);
  OracleModel m(shape, 8, 0.1, 1);
  GaConfig c;
  c.generations = 1000000;
  c.max_evaluations = 5000;
  const auto res = ga_solve(spec, shuffle(spec, 1), m, EvidenceWeights::uniform(shape), c);
  CHECK(res.evaluations == 5000);
  CHECK_THROWS_AS((GaConfig{1, 10, 0.9, 0.05, 0, 3, 0, 0}.validate()), ValidationError);
}

TEST_CASE("order crossover yields permutations holding a slice of the first parent") {
  Rng rng(4);
  for (int t = 0; t < 1000; ++t) {
    const int n = 2 + static_cast<int>(rng.below(20));
    const auto a = random_permutation(n, rng), b = random_permutation(n, rng);
    const auto c = order_crossover(a, b, rng);  // Permutation ctor checks bijectivity
    CHECK(c.size() == n);
    int kept = 0;
    for (int i = 0; i < n; ++i) kept += c[i] == a[i];
    CHECK(kept >= 1);
  }
  const auto id = Permutation::identity(9);
  CHECK(order_crossover(id, id, rng) == id);
}

TEST_CASE("swap mutation keeps a bijection") {
  Rng rng(5);
  const auto p = random_permutation(25, rng);
  CHECK(swap_mutation(p, 0.0, rng) == p);
  for (int t = 0; t < 200; ++t) CHECK(swap_mutation(p, 0.3, rng).size() == 25);
}

TEST_CASE("swap sequence turns one placement into another") {
  Rng rng(6);
  for (int t = 0; t < 200; ++t) {
    const auto a = random_permutation(12, rng), b = random_permutation(12, rng);
    const auto seq = swap_sequence(a, b);
    CHECK(seq.size() <= 11);
    CHECK(replay(a, seq, {3, 4}) == b);
  }
  CHECK(swap_sequence(Permutation::identity(4), Permutation::identity(4)).empty());
}

}
