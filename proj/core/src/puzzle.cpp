#include "jigsaw/puzzle.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

#include "jigsaw/error.hpp"

namespace jigsaw {

PuzzleSpec::PuzzleSpec(BoardShape shape, int fragment_px, int gap_px, std::vector<Raster> fragments)
    : shape_(shape), fragment_px_(fragment_px), gap_px_(gap_px), fragments_(std::move(fragments)) {
  if (shape_.rows < 2 || shape_.cols < 2) throw ValidationError("board must be at least 2x2");
  if (fragment_px_ < 8) throw ValidationError("fragment_px must be >= 8");
  if (gap_px_ < 0) throw ValidationError("gap_px must be >= 0");
  if (fragments_.size() != static_cast<std::size_t>(shape_.cells())) {
    throw ValidationError("expected " + std::to_string(shape_.cells()) + " fragments, got " +
                          std::to_string(fragments_.size()));
  }
  for (std::size_t i = 0; i < fragments_.size(); ++i) {
    const auto& f = fragments_[i];
    if (f.width != fragment_px_ || f.height != fragment_px_ ||
        f.rgb.size() != static_cast<std::size_t>(fragment_px_) * fragment_px_ * 3) {
      throw ValidationError("fragment " + std::to_string(i) + " has wrong dimensions");
    }
  }
}

PuzzleSpec PuzzleSpec::blank(BoardShape shape, int fragment_px, int gap_px) {
  std::vector<Raster> tiles(static_cast<std::size_t>(std::max(shape.cells(), 0)), Raster(fragment_px, fragment_px, 128));
  return PuzzleSpec(shape, fragment_px, gap_px, std::move(tiles));
}

// ---------------------------------------------------------------------------

Permutation::Permutation(std::vector<int> placement) : placement_(std::move(placement)) {
  const auto n = placement_.size();
  std::vector<char> seen(n, 0);
  for (int v : placement_) {
    if (v < 0 || static_cast<std::size_t>(v) >= n || seen[static_cast<std::size_t>(v)]) {
      throw ValidationError("placement is not a permutation");
    }
    seen[static_cast<std::size_t>(v)] = 1;
  }
}

Permutation Permutation::identity(int n) {
  std::vector<int> p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
  return Permutation(std::move(p));
}

std::uint64_t placement_hash(std::span<const int> placement) {
  std::uint64_t h = placement.size();
  for (int v : placement) h = hash_combine(h, static_cast<std::uint64_t>(v));
  return h;
}

Permutation random_permutation(int n, Rng& rng) {
  if (n < 1) throw ValidationError("permutation size must be >= 1");
  std::vector<int> p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
  for (int i = n - 1; i > 0; --i) {
    const auto j = rng.below(static_cast<std::uint64_t>(i) + 1);
    std::swap(p[static_cast<std::size_t>(i)], p[j]);
  }
  return Permutation(std::move(p));
}

bool Permutation::is_identity() const {
  for (std::size_t i = 0; i < placement_.size(); ++i) {
    if (placement_[i] != static_cast<int>(i)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::Swap2: return "swap2";
    case ActionKind::Swap3: return "swap3";
    case ActionKind::SwapPuzzlet: return "swap_puzzlet";
  }
  return "unknown";
}

Action Action::swap2(int p, int q) { return Action{ActionKind::Swap2, {p, q, -1}, true}; }

Action Action::swap3(int p, int q, int r, bool forward) { return Action{ActionKind::Swap3, {p, q, r}, forward}; }

Action Action::swap_puzzlet(int anchor_a, int anchor_b) {
  return Action{ActionKind::SwapPuzzlet, {anchor_a, anchor_b, -1}, true};
}

Action Action::canonical() const {
  Action c = *this;
  switch (kind) {
    case ActionKind::Swap2:
    case ActionKind::SwapPuzzlet:
      if (c.pos[0] > c.pos[1]) std::swap(c.pos[0], c.pos[1]);
      c.pos[2] = -1;
      c.forward = true;
      break;
    case ActionKind::Swap3: {
      if (!c.forward) std::swap(c.pos[1], c.pos[2]);
      c.forward = true;
      const auto first = std::min_element(c.pos.begin(), c.pos.end());
      std::rotate(c.pos.begin(), first, c.pos.end());
      break;
    }
  }
  return c;
}

std::array<int, 4> puzzlet_cells(int anchor, int cols) {
  return {anchor, anchor + 1, anchor + cols, anchor + cols + 1};
}

bool anchors_disjoint(int a, int b, int cols) {
  const int dr = std::abs(a / cols - b / cols);
  const int dc = std::abs(a % cols - b % cols);
  return dr >= 2 || dc >= 2;
}

namespace {

const char* action_problem(const Action& a, BoardShape shape) {
  switch (a.kind) {
    case ActionKind::Swap2:
      if (!shape.contains(a.pos[0]) || !shape.contains(a.pos[1])) return "position off the board";
      if (a.pos[0] == a.pos[1]) return "swap2 positions must differ";
      return nullptr;
    case ActionKind::Swap3:
      for (int p : a.pos) {
        if (!shape.contains(p)) return "position off the board";
      }
      if (a.pos[0] == a.pos[1] || a.pos[1] == a.pos[2] || a.pos[0] == a.pos[2]) {
        return "swap3 positions must be pairwise distinct";
      }
      return nullptr;
    case ActionKind::SwapPuzzlet:
      if (!shape.is_anchor(a.pos[0]) || !shape.is_anchor(a.pos[1])) return "puzzlet anchor off the board";
      if (!anchors_disjoint(a.pos[0], a.pos[1], shape.cols)) return "puzzlet blocks overlap";
      return nullptr;
  }
  return "unknown action kind";
}

}  // namespace

bool is_valid_action(const Action& action, BoardShape shape) { return action_problem(action, shape) == nullptr; }

void validate_action(const Action& action, BoardShape shape) {
  if (const char* problem = action_problem(action, shape)) throw ValidationError(problem);
}

void apply_action_unchecked(std::span<int> pl, const Action& a, int cols) {
  switch (a.kind) {
    case ActionKind::Swap2:
      std::swap(pl[a.pos[0]], pl[a.pos[1]]);
      break;
    case ActionKind::Swap3: {
      const int p0 = a.pos[0], p1 = a.pos[1], p2 = a.pos[2];
      const int f0 = pl[p0], f1 = pl[p1], f2 = pl[p2];
      if (a.forward) {
        pl[p1] = f0;
        pl[p2] = f1;
        pl[p0] = f2;
      } else {
        pl[p2] = f0;
        pl[p0] = f1;
        pl[p1] = f2;
      }
      break;
    }
    case ActionKind::SwapPuzzlet: {
      const auto x = puzzlet_cells(a.pos[0], cols);
      const auto y = puzzlet_cells(a.pos[1], cols);
      for (int k = 0; k < 4; ++k) std::swap(pl[x[k]], pl[y[k]]);
      break;
    }
  }
}

Permutation apply_action(const Permutation& state, const Action& action, BoardShape shape) {
  if (state.size() != shape.cells()) throw ValidationError("permutation does not match board size");
  validate_action(action, shape);
  std::vector<int> next = state.values();
  apply_action_unchecked(next, action, shape.cols);
  return Permutation(std::move(next));
}

ActionSpaceCounts enumerate_action_space(BoardShape shape) {
  const auto n = static_cast<std::uint64_t>(shape.cells());
  ActionSpaceCounts counts;
  counts.swap2 = n * (n - 1) / 2;
  counts.swap3 = 2 * (n * (n - 1) * (n - 2) / 6);
  for (int a = 0; a < shape.cells(); ++a) {
    if (!shape.is_anchor(a)) continue;
    for (int b = a + 1; b < shape.cells(); ++b) {
      if (shape.is_anchor(b) && anchors_disjoint(a, b, shape.cols)) ++counts.swap_puzzlet;
    }
  }
  return counts;
}

std::vector<Action> enumerate_actions(BoardShape shape) {
  const int n = shape.cells();
  std::vector<Action> out;
  for (int p = 0; p < n; ++p) {
    for (int q = p + 1; q < n; ++q) out.push_back(Action::swap2(p, q));
  }
  for (int p = 0; p < n; ++p) {
    for (int q = p + 1; q < n; ++q) {
      for (int r = q + 1; r < n; ++r) {
        out.push_back(Action::swap3(p, q, r, true));
        out.push_back(Action::swap3(p, r, q, true));
      }
    }
  }
  for (int a = 0; a < n; ++a) {
    if (!shape.is_anchor(a)) continue;
    for (int b = a + 1; b < n; ++b) {
      if (shape.is_anchor(b) && anchors_disjoint(a, b, shape.cols)) out.push_back(Action::swap_puzzlet(a, b));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------

MetricsReport metrics(std::span<const int> pl, BoardShape shape) {
  if (static_cast<int>(pl.size()) != shape.cells()) throw ValidationError("permutation does not match board size");
  const int rows = shape.rows, cols = shape.cols;
  MetricsReport m;
  for (int p = 0; p < shape.cells(); ++p) m.absolute_count += pl[p] == p;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c + 1 < cols; ++c) {
      const int a = pl[r * cols + c], b = pl[r * cols + c + 1];
      m.horizontal_count += (b == a + 1 && a % cols != cols - 1);
    }
  }
  for (int r = 0; r + 1 < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int a = pl[r * cols + c], b = pl[(r + 1) * cols + c];
      m.vertical_count += (b == a + cols);
    }
  }
  m.horizontal_pairs = rows * (cols - 1);
  m.vertical_pairs = (rows - 1) * cols;
  m.perfect = m.absolute_count == shape.cells();
  m.absolute_frac = static_cast<double>(m.absolute_count) / shape.cells();
  m.horizontal_frac = static_cast<double>(m.horizontal_count) / m.horizontal_pairs;
  m.vertical_frac = static_cast<double>(m.vertical_count) / m.vertical_pairs;
  m.neighbor_frac =
      static_cast<double>(m.horizontal_count + m.vertical_count) / (m.horizontal_pairs + m.vertical_pairs);
  return m;
}

void RewardParams::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("reward alpha must be in [0,1]");
  if (!(step_penalty_b >= 0.0)) throw ValidationError("step penalty must be non-negative");
  if (!(perfect_bonus > 0.0)) throw ValidationError("perfect bonus must be positive");
}

double reward_from_metrics(const MetricsReport& next, const RewardParams& params) {
  const double shaped = params.alpha * next.absolute_frac + (1.0 - params.alpha) * next.neighbor_frac;
  return next.perfect ? shaped + params.perfect_bonus : shaped - params.step_penalty_b;
}

double reward(const Permutation& prev, const Permutation& next, BoardShape shape, const RewardParams& params) {
  if (prev.size() != next.size()) throw ValidationError("permutations differ in size");
  return reward_from_metrics(metrics(next, shape), params);
}

}  // namespace jigsaw
