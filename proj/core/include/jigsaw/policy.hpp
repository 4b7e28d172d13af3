#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "jigsaw/mlp.hpp"
#include "jigsaw/puzzle.hpp"
#include "jigsaw/rng.hpp"

namespace jigsaw {

/// Multiplicative weights on (Swap2, Swap3, SwapPuzzlet).
using KindPrior = std::array<double, kActionKinds>;

struct SampledAction {
  Action action;
  double log_prob = 0.0;
};

/// Actor output for one state. Logit layout: [kind(3), first(MN), second(MN)].
///
///  kind     p(k) ∝ softmax(z_kind)_k · prior_k, SwapPuzzlet masked when the
///           board has no disjoint anchor pair
///  Swap2    pos0 ~ first head, pos1 ~ second head without pos0
///  Swap3    as Swap2, pos2 ~ second head without pos0, pos1; direction is a
///           fair coin
///  Puzzlet  pos0 ~ first head over anchors that have a disjoint partner,
///           pos1 ~ second head over anchors disjoint from pos0
///
/// Probabilities are over encodings: Swap2(p, q) and Swap2(q, p) are scored
/// separately even though they move the same fragments.
class PolicyDistribution {
 public:
  PolicyDistribution(BoardShape shape, std::vector<double> logits, const KindPrior& prior);

  BoardShape shape() const { return shape_; }
  std::span<const double> logits() const { return logits_; }
  double kind_probability(ActionKind kind) const { return kind_probs_[static_cast<int>(kind)]; }
  bool kind_allowed(ActionKind kind) const { return kind_probability(kind) > 0.0; }

  /// Draws one action. `forced` restricts the kind (its factor is then
  /// excluded from the returned log-probability).
  SampledAction sample(Rng& rng, std::optional<ActionKind> forced = std::nullopt) const;

  /// Joint log-probability of `action`'s encoding. If `logit_grad` is
  /// non-empty its entries receive d log p / d logits (added, not assigned).
  double log_prob(const Action& action, std::span<double> logit_grad = {}) const;

  /// Probability of each position in a head restricted to `allowed`
  /// (empty `allowed` means the full board). Zero outside the support.
  std::vector<double> head_probabilities(int head, std::span<const int> allowed) const;

 private:
  std::span<const double> head(int h) const;
  int draw(int h, std::span<const int> support, Rng& rng) const;
  double head_log_prob(int h, std::span<const int> support, int choice, std::span<double> grad) const;

  BoardShape shape_;
  std::vector<double> logits_;
  KindPrior kind_probs_{};
  std::vector<int> all_cells_;
  std::vector<int> partnered_anchors_;
};

/// Fills `out` with the anchors disjoint from `anchor`.
void disjoint_anchors(BoardShape shape, int anchor, std::vector<int>& out);

/// Anchors with at least one disjoint partner, ascending.
std::vector<int> partnered_anchors(BoardShape shape);

/// Actor network wrapper. Input is the evidence feature vector of the board.
class PolicyHead {
 public:
  PolicyHead() = default;
  PolicyHead(BoardShape shape, Mlp net);

  /// Glorot hidden layers and a zero output layer, so the initial policy is
  /// uniform over each head's support.
  static PolicyHead create(BoardShape shape, const std::vector<std::size_t>& hidden, Rng& rng);
  static std::size_t output_size(BoardShape shape) { return kActionKinds + 2 * static_cast<std::size_t>(shape.cells()); }

  BoardShape shape() const { return shape_; }
  const Mlp& net() const { return net_; }
  Mlp& net() { return net_; }

  PolicyDistribution distribution(std::span<const double> features, const KindPrior& prior) const;
  PolicyDistribution distribution(std::span<const double> features, const KindPrior& prior, Mlp::Trace& trace) const;

 private:
  BoardShape shape_;
  Mlp net_;
};

/// `count` independent draws from the actor; duplicates allowed.
std::vector<SampledAction> sample_actions(const PolicyHead& policy, std::span<const double> features,
                                          std::size_t count, const KindPrior& prior, Rng& rng);

/// Linear interpolation between two priors, t clamped to [0, 1].
KindPrior blend_prior(const KindPrior& start, const KindPrior& end, double t);

}  // namespace jigsaw
