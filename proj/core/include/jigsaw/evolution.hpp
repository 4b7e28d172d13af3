#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "jigsaw/mlp.hpp"
#include "jigsaw/perception.hpp"
#include "jigsaw/policy.hpp"
#include "jigsaw/puzzle.hpp"
#include "jigsaw/rng.hpp"

namespace jigsaw {

struct EvoConfig {
  int iterations = 10;
  int population = 64;
  double crossover_rate = 0.9;
  double mutation_rate = 0.1;
  /// Best offspring carried unchanged into the next parent pool (>= 1).
  int elite = 4;
  int tournament = 3;
  /// Parents drawn from the actor per step.
  int actor_samples = 64;
  /// Most recently executed actions added as parents (the current episode
  /// first, then the replay buffer).
  int history_actions = 16;
  /// 1 scores r + γ·V(s'); deeper rollouts continue with actor samples.
  int rollout_depth = 1;

  void validate() const;
};

/// Scalar state-value network: value = scale · net(input(features)).
///
/// With `summary` set the network sees four numbers, the global score and
/// the mean of each local head, rather than the whole feature vector.
struct ValueFunction {
  Mlp net;
  double scale = 1000.0;
  std::optional<BoardShape> summary;

  static ValueFunction create(std::size_t inputs, const std::vector<std::size_t>& hidden, Rng& rng, double scale);
  static ValueFunction create_summary(BoardShape shape, const std::vector<std::size_t>& hidden, Rng& rng,
                                      double scale);
  static constexpr std::size_t kSummaryInputs = 4;

  std::vector<double> input(std::span<const double> features) const;
  double operator()(std::span<const double> features) const { return scale * net.forward(input(features))[0]; }
};

/// What the agent observes after moving to a placement.
struct StepOutcome {
  double reward = 0.0;
  std::vector<double> features;
  bool terminal = false;
  /// Aggregate evidence of the placement.
  double evidence = 0.0;
};

/// Environment side of a lookahead. Implementations count evidence queries
/// through their EvidenceEvaluator.
class StepContext {
 public:
  virtual ~StepContext() = default;
  virtual StepOutcome evaluate(std::span<const int> placement) = 0;
  virtual BoardShape shape() const = 0;
};

/// Training environment: reward and termination from the true metrics,
/// features from perception.
class GroundTruthContext final : public StepContext {
 public:
  GroundTruthContext(EvidenceEvaluator& evaluator, RewardParams params);
  StepOutcome evaluate(std::span<const int> placement) override;
  BoardShape shape() const override { return evaluator_.spec().shape(); }

 private:
  EvidenceEvaluator& evaluator_;
  RewardParams params_;
};

/// Test-time environment: the reward is estimated from perception only.
class PerceivedContext final : public StepContext {
 public:
  PerceivedContext(EvidenceEvaluator& evaluator, RewardParams params);
  StepOutcome evaluate(std::span<const int> placement) override;
  BoardShape shape() const override { return evaluator_.spec().shape(); }

 private:
  EvidenceEvaluator& evaluator_;
  RewardParams params_;
};

/// Reward with ground-truth fractions replaced by their perceived estimates:
/// normalised aggregate evidence for the absolute term and mean pair-head
/// score for the neighbor term; the bonus applies when perceived_perfect.
double perceived_reward(const EvidenceReport& report, const EvidenceWeights& weights, const RewardParams& params);

/// Continuation policy for rollouts deeper than one step.
struct RolloutPolicy {
  const PolicyHead* actor = nullptr;
  KindPrior prior{1.0, 1.0, 1.0};
};

/// The most recently visited placements, by hash. A lookahead never moves
/// into one of them unless every candidate does.
class StateTabu {
 public:
  explicit StateTabu(std::size_t capacity) : capacity_(capacity) {}

  void visit(std::span<const int> placement);
  bool contains(std::span<const int> placement) const;
  std::size_t size() const { return order_.size(); }
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::deque<std::uint64_t> order_;
  std::unordered_map<std::uint64_t, int> counts_;
};

struct EvolutionResult {
  Action action;
  double score = 0.0;
  double initial_best_score = 0.0;
  /// Best score in the parent pool after each iteration.
  std::vector<double> best_per_iteration;
  /// Distinct placements sent to the context.
  std::uint64_t evaluations = 0;
  /// One-step outcome of `action`.
  StepOutcome outcome;
};

/// Evolves `parents` for config.iterations generations and returns the best
/// scoring action seen. Scores are γ-discounted rollouts bootstrapped by
/// `evaluator`; equal scores resolve to the lower canonical action. Moves
/// into a placement held by `tabu` score -inf and cost no evaluation.
EvolutionResult evolve_action(std::span<const Action> parents, std::span<const int> placement, StepContext& context,
                              const ValueFunction& evaluator, double gamma, const EvoConfig& config, Rng& rng,
                              const RolloutPolicy& rollout = {}, const StateTabu* tabu = nullptr);

/// Uniform kind among those the board allows, then uniform valid positions.
Action random_action(BoardShape shape, Rng& rng);

/// Field-level crossover: kind from one parent, slots mixed, then repaired.
Action crossover(const Action& a, const Action& b, BoardShape shape, Rng& rng);

/// Replaces each slot with a uniform valid one with probability `rate` (and
/// flips a Swap3 direction at the same rate), then repairs.
Action mutate(const Action& a, BoardShape shape, double rate, Rng& rng);

/// Makes an encoding valid: clamps puzzlet anchors to the board and redraws
/// duplicate or overlapping slots uniformly.
Action repair(Action a, BoardShape shape, Rng& rng);

}  // namespace jigsaw
