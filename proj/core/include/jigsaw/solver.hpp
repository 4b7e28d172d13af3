#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jigsaw/puzzle.hpp"

namespace jigsaw {

/// Common result of every solver.
struct SolveResult {
  Permutation final_state = Permutation::identity(1);
  /// Moves leading from the initial placement to `final_state`.
  std::vector<Action> actions;
  MetricsReport metrics;
  /// Evidence evaluations consumed, the budget unit shared by all solvers.
  std::uint64_t evaluations = 0;
  /// Moves, generations or iterations performed, including any undone by a
  /// return to an earlier best state.
  int steps = 0;
};

}  // namespace jigsaw
