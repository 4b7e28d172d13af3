#pragma once

#include <cstdint>
#include <vector>

#include "jigsaw/perception.hpp"
#include "jigsaw/puzzle.hpp"
#include "jigsaw/rng.hpp"
#include "jigsaw/solver.hpp"

namespace jigsaw {

struct GreedyConfig {
  /// 0: run to a local maximum.
  int max_steps = 0;
  std::uint64_t max_evaluations = 0;
};

struct TabuConfig {
  int tenure = 10;
  int max_iterations = 1000;
  std::uint64_t seed = 0;
  std::uint64_t max_evaluations = 0;

  void validate() const;
};

struct GaConfig {
  int population = 64;
  int generations = 1000;
  double crossover_rate = 0.9;
  /// Per-gene probability of swapping with a random position.
  double mutation_rate = 0.1;
  int elite = 2;
  int tournament = 2;
  std::uint64_t seed = 0;
  std::uint64_t max_evaluations = 0;

  void validate() const;
};

/// Repeatedly applies the Swap2 move with the largest strict gain in
/// aggregate evidence (lowest position pair on ties) until none improves.
/// `evidence_trace`, if given, receives E of every visited placement.
SolveResult greedy_solve(const PuzzleSpec& spec, const Permutation& initial, const PerceptionModel& model,
                         const EvidenceWeights& weights, const GreedyConfig& config = {},
                         std::vector<double>* evidence_trace = nullptr);

/// Best admissible Swap2 neighbour each iteration; a swapped position pair is
/// tabu for `tenure` iterations unless it beats the best E seen. If every
/// move is tabu, the move whose tabu expires soonest is taken. Ties between
/// equal moves are broken uniformly with the seeded generator. Returns the
/// best placement ever visited; `best_trace` receives the running best E.
SolveResult tabu_solve(const PuzzleSpec& spec, const Permutation& initial, const PerceptionModel& model,
                       const EvidenceWeights& weights, const TabuConfig& config,
                       std::vector<double>* best_trace = nullptr);

/// Permutation GA: tournament selection, order crossover, per-gene swap
/// mutation and elitism, fitness = aggregate E. The population starts from
/// `initial` plus random permutations. Returns the fittest individual ever;
/// `best_per_generation` receives the population's best fitness after each
/// generation.
SolveResult ga_solve(const PuzzleSpec& spec, const Permutation& initial, const PerceptionModel& model,
                     const EvidenceWeights& weights, const GaConfig& config,
                     std::vector<double>* best_per_generation = nullptr);

/// Order crossover (OX1): a random slice of `a`, remaining genes in the
/// order they appear in `b`.
Permutation order_crossover(const Permutation& a, const Permutation& b, Rng& rng);

/// Each position swaps with a uniform random position with probability `rate`.
Permutation swap_mutation(const Permutation& p, double rate, Rng& rng);

/// Swap2 moves turning `from` into `to` (at most n - 1 of them).
std::vector<Action> swap_sequence(const Permutation& from, const Permutation& to);

}  // namespace jigsaw
