#include <doctest.h>

#include <algorithm>
#include <set>

#include "jigsaw/error.hpp"
#include "jigsaw/puzzle.hpp"
#include "oracles.hpp"

using namespace jigsaw;

TEST_SUITE("puzzle") {

TEST_CASE("permutation rejects non-bijections") {
  CHECK_THROWS_AS(Permutation({0, 0, 1}), ValidationError);
  CHECK_THROWS_AS(Permutation({0, 3, 1}), ValidationError);
  CHECK_THROWS_AS(Permutation({-1, 0, 1}), ValidationError);
  CHECK(Permutation({2, 0, 1}).size() == 3);
  CHECK(Permutation::identity(6).is_identity());
  CHECK_FALSE(Permutation({1, 0}).is_identity());
}

TEST_CASE("random_permutation is a seeded bijection") {
  Rng a(5), b(5);
  for (int t = 0; t < 50; ++t) {
    auto p = random_permutation(12, a);
    auto q = random_permutation(12, b);
    CHECK(p == q);
    auto v = p.values();
    std::sort(v.begin(), v.end());
    for (int i = 0; i < 12; ++i) CHECK(v[i] == i);
  }
}

TEST_CASE("swap3 forward moves pos0 to pos1") {
  const BoardShape shape{2, 3};
  const auto s = Permutation({0, 1, 2, 3, 4, 5});
  const auto f = apply_action(s, Action::swap3(0, 1, 2, true), shape);
  CHECK(f.values() == std::vector<int>{2, 0, 1, 3, 4, 5});
  const auto b = apply_action(f, Action::swap3(0, 1, 2, false), shape);
  CHECK(b == s);
}

TEST_CASE("puzzlet swap exchanges blocks position-wise") {
  const BoardShape shape{2, 4};
  const auto s = Permutation::identity(8);
  const auto t = apply_action(s, Action::swap_puzzlet(0, 2), shape);
  CHECK(t.values() == std::vector<int>{2, 3, 0, 1, 6, 7, 4, 5});
}

TEST_CASE("invalid actions are rejected") {
  const BoardShape shape{3, 3};
  CHECK_FALSE(is_valid_action(Action::swap2(1, 1), shape));
  CHECK_FALSE(is_valid_action(Action::swap2(0, 9), shape));
  CHECK_FALSE(is_valid_action(Action::swap3(0, 1, 1), shape));
  CHECK_FALSE(is_valid_action(Action::swap_puzzlet(0, 1), shape));  // overlapping
  CHECK_FALSE(is_valid_action(Action::swap_puzzlet(0, 2), shape));  // 2 is not an anchor on 3 columns
  CHECK(is_valid_action(Action::swap2(0, 8), shape));
  CHECK_THROWS_AS(validate_action(Action::swap2(3, 3), shape), ValidationError);
  CHECK_THROWS_AS(apply_action(Permutation::identity(9), Action::swap2(3, 3), shape), ValidationError);
}

TEST_CASE("canonical form identifies moves with the same effect") {
  const BoardShape shape{3, 3};
  const auto s = Permutation({4, 2, 7, 0, 1, 8, 3, 6, 5});
  Rng rng(11);
  for (int t = 0; t < 500; ++t) {
    int p = static_cast<int>(rng.below(9)), q = static_cast<int>(rng.below(9)), r = static_cast<int>(rng.below(9));
    if (p == q || q == r || p == r) continue;
    const Action a = Action::swap3(p, q, r, rng.bernoulli(0.5));
    CHECK(apply_action(s, a, shape) == apply_action(s, a.canonical(), shape));
    CHECK(a.canonical() == a.canonical().canonical());
  }
  CHECK(Action::swap2(5, 2).canonical() == Action::swap2(2, 5));
  CHECK(Action::swap3(4, 1, 2, false).canonical() == Action::swap3(1, 4, 2, true));
}

TEST_CASE("action space counts match brute-force enumeration") {
  for (auto [r, c] : std::vector<std::pair<int, int>>{{2, 2}, {2, 3}, {3, 3}, {3, 4}, {4, 4}}) {
    const BoardShape shape{r, c};
    const auto counts = enumerate_action_space(shape);
    const auto brute = oracle::count_moves(r, c);
    CHECK(counts.swap2 == brute[0]);
    CHECK(counts.swap3 == brute[1]);
    CHECK(counts.swap_puzzlet == brute[2]);
    const auto all = enumerate_actions(shape);
    CHECK(all.size() == counts.total());
    CHECK(std::is_sorted(all.begin(), all.end()));
    for (const auto& a : all) CHECK(a == a.canonical());
  }
}

TEST_CASE("enumerated actions reach exactly the one-move neighbourhood") {
  const BoardShape shape{3, 3};
  const auto s = Permutation({3, 1, 8, 0, 4, 6, 2, 7, 5});
  std::set<std::vector<int>> reached;
  for (const auto& a : enumerate_actions(shape)) reached.insert(apply_action(s, a, shape).values());
  const auto brute = oracle::one_move_neighbours(s.values(), 3, 3);
  CHECK(reached == std::set<std::vector<int>>(brute.begin(), brute.end()));
}

TEST_CASE("metrics fixture: 5x5 with positions 0 and 1 swapped") {
  std::vector<int> pl(25);
  for (int i = 0; i < 25; ++i) pl[i] = i;
  std::swap(pl[0], pl[1]);
  const auto m = metrics(pl, {5, 5});
  CHECK_FALSE(m.perfect);
  CHECK(m.absolute_frac == doctest::Approx(23.0 / 25).epsilon(1e-12));
  CHECK(m.horizontal_frac == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(m.vertical_frac == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(std::abs(reward_from_metrics(m, {}) - (-0.084)) < 1e-9);
}

TEST_CASE("metrics of the identity are perfect") {
  const auto m = metrics(Permutation::identity(12), {3, 4});
  CHECK(m.perfect);
  CHECK(m.absolute_frac == 1.0);
  CHECK(m.neighbor_frac == 1.0);
  CHECK(std::abs(reward_from_metrics(m, {}) - 1001.0) < 1e-9);
}

TEST_CASE("metrics and reward equal a brute-force scan") {
  Rng rng(2024);
  for (auto [r, c] : std::vector<std::pair<int, int>>{{2, 2}, {3, 5}, {5, 5}, {4, 7}}) {
    for (int t = 0; t < 200; ++t) {
      const auto p = random_permutation(r * c, rng);
      const auto m = metrics(p, {r, c});
      const auto o = oracle::brute_metrics(p.values(), r, c);
      CHECK(m.perfect == o.perfect);
      CHECK(std::abs(m.absolute_frac - o.absolute) < 1e-12);
      CHECK(std::abs(m.horizontal_frac - o.horizontal) < 1e-12);
      CHECK(std::abs(m.vertical_frac - o.vertical) < 1e-12);
      CHECK(std::abs(m.neighbor_frac - o.neighbor) < 1e-12);
      CHECK(std::abs(reward(Permutation::identity(r * c), p, {r, c}, {}) - oracle::brute_reward(p.values(), r, c)) < 1e-9);
    }
  }
}

TEST_CASE("reward parameters are validated") {
  CHECK_THROWS_AS((RewardParams{1.5, 1.0, 1000.0}.validate()), ValidationError);
  CHECK_THROWS_AS((RewardParams{0.8, -1.0, 1000.0}.validate()), ValidationError);
  CHECK_NOTHROW(RewardParams{}.validate());
}

TEST_CASE("puzzlet anchors and disjointness") {
  const BoardShape shape{3, 4};
  CHECK(shape.is_anchor(0));
  CHECK(shape.is_anchor(6));
  CHECK_FALSE(shape.is_anchor(3));
  CHECK_FALSE(shape.is_anchor(8));
  CHECK(anchors_disjoint(0, 2, 4));
  CHECK_FALSE(anchors_disjoint(0, 1, 4));
  CHECK_FALSE(anchors_disjoint(0, 5, 4));
  CHECK(puzzlet_cells(5, 4) == std::array<int, 4>{5, 6, 9, 10});
}

}
