#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jigsaw/raster.hpp"
#include "jigsaw/rng.hpp"

namespace jigsaw {

/// Board geometry. Positions are row-major indices in [0, rows*cols).
struct BoardShape {
  int rows = 0;
  int cols = 0;

  constexpr int cells() const { return rows * cols; }
  constexpr int index(int r, int c) const { return r * cols + c; }
  constexpr int row(int p) const { return p / cols; }
  constexpr int col(int p) const { return p % cols; }
  constexpr bool contains(int p) const { return p >= 0 && p < cells(); }

  /// Top-left anchor of a 2×2 block must leave room for the block.
  constexpr bool is_anchor(int p) const {
    return contains(p) && row(p) <= rows - 2 && col(p) <= cols - 2;
  }

  friend constexpr bool operator==(const BoardShape&, const BoardShape&) = default;
};

/// Geometry plus fragment pixels. Fragment i is the tile whose ground-truth
/// position is board position i, so the solved placement is the identity.
class PuzzleSpec {
 public:
  PuzzleSpec(BoardShape shape, int fragment_px, int gap_px, std::vector<Raster> fragments);

  /// Geometry-only spec with flat mid-gray fragments.
  static PuzzleSpec blank(BoardShape shape, int fragment_px = 8, int gap_px = 0);

  BoardShape shape() const { return shape_; }
  int rows() const { return shape_.rows; }
  int cols() const { return shape_.cols; }
  int fragment_px() const { return fragment_px_; }
  int gap_px() const { return gap_px_; }
  const std::vector<Raster>& fragments() const { return fragments_; }
  const Raster& fragment(int i) const { return fragments_.at(static_cast<std::size_t>(i)); }

  friend bool operator==(const PuzzleSpec&, const PuzzleSpec&) = default;

 private:
  BoardShape shape_;
  int fragment_px_;
  int gap_px_;
  std::vector<Raster> fragments_;
};

/// placement[p] is the fragment currently at board position p.
class Permutation {
 public:
  /// Throws ValidationError unless `placement` is a bijection on [0, n).
  explicit Permutation(std::vector<int> placement);

  static Permutation identity(int n);

  std::span<const int> placement() const { return placement_; }
  const std::vector<int>& values() const { return placement_; }
  int operator[](int p) const { return placement_[static_cast<std::size_t>(p)]; }
  int size() const { return static_cast<int>(placement_.size()); }
  bool is_identity() const;

  friend bool operator==(const Permutation&, const Permutation&) = default;

 private:
  std::vector<int> placement_;
};

/// 64-bit hash of a placement, for remembering visited states.
std::uint64_t placement_hash(std::span<const int> placement);

/// Uniform permutation of [0, n) by Fisher-Yates over `rng`.
Permutation random_permutation(int n, Rng& rng);

enum class ActionKind : std::uint8_t { Swap2 = 0, Swap3 = 1, SwapPuzzlet = 2 };
inline constexpr int kActionKinds = 3;

std::string_view to_string(ActionKind kind);

/// A swap move. Unused position slots hold -1.
///  - Swap2: exchange the fragments at pos[0] and pos[1].
///  - Swap3: 3-cycle over pos[0..2]; forward moves the fragment at pos[0] to
///    pos[1], pos[1] to pos[2] and pos[2] to pos[0]; backward is the inverse.
///  - SwapPuzzlet: pos[0] and pos[1] are top-left anchors of two disjoint
///    2×2 blocks whose cells are exchanged position-wise.
struct Action {
  ActionKind kind = ActionKind::Swap2;
  std::array<int, 3> pos{-1, -1, -1};
  bool forward = true;

  static Action swap2(int p, int q);
  static Action swap3(int p, int q, int r, bool forward = true);
  static Action swap_puzzlet(int anchor_a, int anchor_b);

  int arity() const { return kind == ActionKind::Swap3 ? 3 : 2; }

  /// Unique representative of the move's effect: sorted Swap2/SwapPuzzlet
  /// slots, Swap3 rewritten as a forward cycle starting at its smallest slot.
  Action canonical() const;

  friend auto operator<=>(const Action&, const Action&) = default;
};

/// The four cells of the 2×2 block anchored at `anchor` (tl, tr, bl, br).
std::array<int, 4> puzzlet_cells(int anchor, int cols);

bool anchors_disjoint(int a, int b, int cols);

bool is_valid_action(const Action& action, BoardShape shape);

/// Throws ValidationError describing the first violated invariant.
void validate_action(const Action& action, BoardShape shape);

/// Returns the permutation after the move; `state` is untouched.
Permutation apply_action(const Permutation& state, const Action& action, BoardShape shape);

/// In-place variant without validation, for inner loops over known-valid moves.
void apply_action_unchecked(std::span<int> placement, const Action& action, int cols);

struct ActionSpaceCounts {
  std::uint64_t swap2 = 0;
  std::uint64_t swap3 = 0;
  std::uint64_t swap_puzzlet = 0;

  std::uint64_t total() const { return swap2 + swap3 + swap_puzzlet; }
  friend bool operator==(const ActionSpaceCounts&, const ActionSpaceCounts&) = default;
};

ActionSpaceCounts enumerate_action_space(BoardShape shape);

/// Every distinct move in canonical form, sorted by the canonical ordering.
/// Size grows as O((rows*cols)^3); intended for small boards.
std::vector<Action> enumerate_actions(BoardShape shape);

struct MetricsReport {
  bool perfect = false;
  double absolute_frac = 0.0;
  double horizontal_frac = 0.0;
  double vertical_frac = 0.0;
  double neighbor_frac = 0.0;

  int absolute_count = 0;
  int horizontal_count = 0;
  int vertical_count = 0;
  int horizontal_pairs = 0;
  int vertical_pairs = 0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

MetricsReport metrics(std::span<const int> placement, BoardShape shape);
inline MetricsReport metrics(const Permutation& state, BoardShape shape) {
  return metrics(state.placement(), shape);
}

struct RewardParams {
  double alpha = 0.8;
  double step_penalty_b = 1.0;
  double perfect_bonus = 1000.0;

  void validate() const;
};

/// alpha * absolute + (1 - alpha) * neighbor + perfect bonus, minus the step
/// penalty on every step that does not end solved.
double reward_from_metrics(const MetricsReport& next, const RewardParams& params);

/// Reward for the transition prev -> next. Depends only on `next`.
double reward(const Permutation& prev, const Permutation& next, BoardShape shape, const RewardParams& params);

struct PuzzleInstance {
  std::string id;
  PuzzleSpec spec;
  Permutation initial;
};

}  // namespace jigsaw
