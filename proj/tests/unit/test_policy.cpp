#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "jigsaw/error.hpp"
#include "jigsaw/perception.hpp"
#include "jigsaw/policy.hpp"
#include "oracles.hpp"

using namespace jigsaw;

namespace {

// log softmax of logits[off .. off+n) restricted to `support`, at `pick`
double log_softmax_at(const std::vector<double>& z, int off, const std::vector<int>& support, int pick) {
  double m = -1e300;
  for (int s : support) m = std::max(m, z[off + s]);
  double sum = 0.0;
  for (int s : support) sum += std::exp(z[off + s] - m);
  return z[off + pick] - m - std::log(sum);
}

std::vector<int> without(int n, std::vector<int> drop) {
  std::vector<int> out;
  for (int i = 0; i < n; ++i)
    if (std::find(drop.begin(), drop.end(), i) == drop.end()) out.push_back(i);
  return out;
}

// Independent recomputation of the factored log-probability.
double factored_log_prob(BoardShape shape, const std::vector<double>& z, const KindPrior& prior, const Action& a) {
  const int n = shape.cells();
  std::vector<int> anchors;
  for (int p = 0; p < n; ++p) {
    if (!shape.is_anchor(p)) continue;
    for (int q = 0; q < n; ++q)
      if (shape.is_anchor(q) && anchors_disjoint(p, q, shape.cols)) {
        anchors.push_back(p);
        break;
      }
  }
  double w[3];
  double tot = 0.0;
  for (int k = 0; k < 3; ++k) {
    w[k] = (k == 2 && anchors.empty()) ? 0.0 : std::exp(z[k]) * prior[k];
    tot += w[k];
  }
  double lp = std::log(w[static_cast<int>(a.kind)] / tot);
  const int f = 3, s = 3 + n;
  switch (a.kind) {
    case ActionKind::Swap2:
      lp += log_softmax_at(z, f, without(n, {}), a.pos[0]);
      lp += log_softmax_at(z, s, without(n, {a.pos[0]}), a.pos[1]);
      break;
    case ActionKind::Swap3:
      lp += log_softmax_at(z, f, without(n, {}), a.pos[0]);
      lp += log_softmax_at(z, s, without(n, {a.pos[0]}), a.pos[1]);
      lp += log_softmax_at(z, s, without(n, {a.pos[0], a.pos[1]}), a.pos[2]);
      lp += std::log(0.5);
      break;
    case ActionKind::SwapPuzzlet: {
      lp += log_softmax_at(z, f, anchors, a.pos[0]);
      std::vector<int> partners;
      for (int q = 0; q < n; ++q)
        if (shape.is_anchor(q) && anchors_disjoint(a.pos[0], q, shape.cols)) partners.push_back(q);
      lp += log_softmax_at(z, s, partners, a.pos[1]);
      break;
    }
  }
  return lp;
}

std::vector<double> random_logits(BoardShape shape, Rng& rng) {
  std::vector<double> z(PolicyHead::output_size(shape));
  for (auto& v : z) v = rng.uniform() * 4 - 2;
  return z;
}

}  // namespace

TEST_SUITE("policy") {

TEST_CASE("uniform actor forced to Swap2 on 2x2 hits each pair one time in six") {
  const BoardShape shape{2, 2};
  Rng rng(5);
  const auto actor = PolicyHead::create(shape, {16}, rng);
  const std::vector<double> features(feature_count(shape), 0.3);
  const auto dist = actor.distribution(features, {1, 1, 1});
  std::map<Action, int> counts;
  for (int t = 0; t < 10000; ++t) ++counts[dist.sample(rng, ActionKind::Swap2).action.canonical()];
  CHECK(counts.size() == 6);
  for (const auto& [a, c] : counts) CHECK(std::abs(c / 10000.0 - 1.0 / 6) <= 0.02);
}

TEST_CASE("samples are valid and puzzlets are masked where impossible") {
  const BoardShape shape{3, 3};
  Rng rng(6);
  const auto actor = PolicyHead::create(shape, {16}, rng);
  std::vector<double> features(feature_count(shape));
  for (auto& v : features) v = rng.uniform();
  const auto dist = actor.distribution(features, {1, 1, 1});
  CHECK(dist.kind_probability(ActionKind::SwapPuzzlet) == 0.0);
  for (int t = 0; t < 10000; ++t) {
    const auto s = dist.sample(rng);
    CHECK(is_valid_action(s.action, shape));
    CHECK(s.action.kind != ActionKind::SwapPuzzlet);
  }
  const BoardShape wide{3, 4};
  const auto other = PolicyHead::create(wide, {16}, rng);
  const auto d2 = other.distribution(std::vector<double>(feature_count(wide), 0.5), {1, 1, 1});
  CHECK(d2.kind_probability(ActionKind::SwapPuzzlet) > 0.0);
  int puzzlets = 0;
  for (int t = 0; t < 10000; ++t) {
    const auto s = d2.sample(rng);
    CHECK(is_valid_action(s.action, wide));
    puzzlets += s.action.kind == ActionKind::SwapPuzzlet;
  }
  CHECK(puzzlets > 0);
  CHECK(partnered_anchors({3, 3}).empty());
  CHECK(partnered_anchors({3, 4}) == std::vector<int>{0, 2, 4, 6});
}

TEST_CASE("log-probability equals the sum of its factors") {
  Rng rng(7);
  for (auto shape : {BoardShape{2, 2}, BoardShape{3, 4}, BoardShape{4, 4}}) {
    for (int t = 0; t < 50; ++t) {
      const auto z = random_logits(shape, rng);
      const KindPrior prior{0.2 + rng.uniform(), 0.1 + rng.uniform(), rng.uniform()};
      PolicyDistribution dist(shape, z, prior);
      for (int k = 0; k < 10; ++k) {
        const auto s = dist.sample(rng);
        CHECK(std::abs(s.log_prob - factored_log_prob(shape, z, prior, s.action)) < 1e-9);
        CHECK(std::abs(dist.log_prob(s.action) - s.log_prob) < 1e-12);
      }
    }
  }
}

TEST_CASE("kind probabilities and head probabilities are normalised") {
  Rng rng(8);
  const BoardShape shape{4, 4};
  PolicyDistribution dist(shape, random_logits(shape, rng), {0.8, 0.15, 0.05});
  double s = 0.0;
  for (int k = 0; k < 3; ++k) s += dist.kind_probability(static_cast<ActionKind>(k));
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  for (int h = 0; h < 2; ++h) {
    const auto all = dist.head_probabilities(h, {});
    CHECK(std::accumulate(all.begin(), all.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    const std::vector<int> part{1, 5, 9};
    const auto some = dist.head_probabilities(h, part);
    CHECK(std::accumulate(some.begin(), some.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(some[0] == 0.0);
  }
}

TEST_CASE("log-probability gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const BoardShape shape{3, 4};
    const auto z = random_logits(shape, rng);
    const KindPrior prior{0.5, 0.3, 0.2};
    const auto action = PolicyDistribution(shape, z, prior).sample(rng).action;
    std::vector<double> grad(z.size(), 0.0);
    PolicyDistribution(shape, z, prior).log_prob(action, grad);
    const auto fd = oracle::finite_difference(
        [&](std::span<const double> x) {
          return PolicyDistribution(shape, std::vector<double>(x.begin(), x.end()), prior).log_prob(action);
        },
        z, 1e-5);
    CHECK(oracle::max_relative_error(grad, fd) < 1e-4);
  }
}

TEST_CASE("forcing a masked kind or passing a bad prior fails") {
  const BoardShape shape{2, 2};
  PolicyDistribution dist(shape, std::vector<double>(PolicyHead::output_size(shape), 0.0), {1, 1, 1});
  Rng rng(1);
  CHECK_THROWS_AS(dist.sample(rng, ActionKind::SwapPuzzlet), ValidationError);
  CHECK_THROWS_AS(PolicyDistribution(shape, std::vector<double>(3, 0.0), {1, 1, 1}), ValidationError);
  CHECK_THROWS_AS(PolicyDistribution(shape, std::vector<double>(11, 0.0), {-1, 1, 1}), ValidationError);
  CHECK_THROWS_AS(PolicyDistribution(shape, std::vector<double>(11, 0.0), {0, 0, 1}), ValidationError);
}

TEST_CASE("sample_actions draws the requested count") {
  const BoardShape shape{3, 3};
  Rng rng(9);
  const auto actor = PolicyHead::create(shape, {8}, rng);
  const auto s = sample_actions(actor, std::vector<double>(feature_count(shape), 0.0), 37, {1, 1, 1}, rng);
  CHECK(s.size() == 37);
  CHECK_THROWS_AS(sample_actions(actor, std::vector<double>(feature_count(shape), 0.0), 0, {1, 1, 1}, rng),
                  ValidationError);
}

TEST_CASE("prior blending clamps its parameter") {
  const KindPrior a{0.2, 0.3, 0.5}, b{0.8, 0.15, 0.05};
  CHECK(blend_prior(a, b, 0.0) == a);
  CHECK(blend_prior(a, b, 1.0) == b);
  CHECK(blend_prior(a, b, 2.0) == b);
  const auto m = blend_prior(a, b, 0.5);
  CHECK(m[0] == doctest::Approx(0.5));
  CHECK(m[2] == doctest::Approx(0.275));
}

}
