#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "jigsaw/checkpoint.hpp"
#include "jigsaw/evolution.hpp"
#include "jigsaw/perception.hpp"
#include "jigsaw/policy.hpp"
#include "jigsaw/puzzle.hpp"
#include "jigsaw/solver.hpp"

namespace jigsaw {

struct TrainConfig {
  int iterations = 1000;
  int max_swaps = 10000;
  double gamma = 0.998;
  double clip_epsilon = 0.2;
  double soft_update_beta = 0.01;
  /// Kind prior annealed linearly across iterations.
  KindPrior prior_start{0.2, 0.3, 0.5};
  KindPrior prior_end{0.8, 0.15, 0.05};
  std::size_t buffer_capacity = 100;
  std::size_t batch_size = 64;
  int update_epochs = 4;
  double actor_learning_rate = 3e-4;
  double critic_learning_rate = 1e-3;
  double grad_clip = 1.0;
  /// Hidden layer widths of the actor.
  std::vector<std::size_t> hidden{128, 128};
  /// Hidden layer widths of the critic and evaluator; empty is a linear value.
  std::vector<std::size_t> critic_hidden{128, 128};
  /// Feed the critic and evaluator the four-number evidence summary instead
  /// of the full feature vector.
  bool critic_summary = false;
  /// Critic and evaluator outputs are multiplied by this, so the networks
  /// work at unit scale while returns reach the size of the perfect bonus.
  double value_scale = 1000.0;
  /// Steps without beating the current climb's best reward before a burst
  /// of random large moves is executed (0 disables).
  int stagnation_patience = 8;
  int escape_burst = 6;
  /// Placements visited in the last this-many steps are not moved back into
  /// by the lookahead (0 disables).
  int tabu_states = 0;
  /// Credit an episode cut off by max_swaps with the evaluator's value of
  /// its last state instead of treating the cut as terminal.
  bool bootstrap_truncated = false;
  /// Start each episode from a fresh shuffle of the selected instance.
  bool reshuffle = true;

  void validate() const;
};

/// Kind prior at training iteration k of K.
KindPrior scheduled_prior(const TrainConfig& config, int iteration);

struct TransitionRecord {
  std::vector<double> features;
  Action action;
  double reward = 0.0;
  std::vector<double> next_features;
  bool done = false;
  /// Actor log-probability of `action` when it was executed, under `prior`.
  double log_prob_old = 0.0;
  KindPrior prior{};
  /// Discounted sum of this and all later rewards of the episode.
  double return_to_go = 0.0;

  friend bool operator==(const TransitionRecord&, const TransitionRecord&) = default;
};

using Trajectory = std::vector<TransitionRecord>;

/// G_t = R_t + γ G_{t+1}, accumulated backwards from the last reward.
/// `tail` is the value credited after the last reward (0 for a finished episode).
std::vector<double> returns_to_go(std::span<const double> rewards, double gamma, double tail = 0.0);

/// Bounded FIFO of whole trajectories; capacity counts trajectories and the
/// oldest one is evicted first. Records are addressed by a flat index,
/// oldest trajectory first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 100);

  /// Empty trajectories are ignored.
  void push(Trajectory trajectory);

  /// Number of stored records across all trajectories.
  std::size_t size() const { return records_; }
  std::size_t trajectories() const { return episodes_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return records_ == 0; }
  const TransitionRecord& operator[](std::size_t i) const;
  const Trajectory& trajectory(std::size_t i) const { return episodes_[i]; }

  /// min(batch, size) distinct record indices drawn uniformly.
  std::vector<std::size_t> sample(std::size_t batch, Rng& rng) const;

  /// Actions of the newest `count` records, newest first.
  std::vector<Action> recent_actions(std::size_t count) const;

 private:
  std::size_t capacity_;
  std::size_t records_ = 0;
  std::deque<Trajectory> episodes_;
};

/// R + γ·V(s')·(1 − done) − V(s).
double compute_advantage(double reward, double value, double next_value, double gamma, bool done);

struct PolicyLossTerms {
  double ratio = 1.0;
  double objective = 0.0;
  double loss = 0.0;
  /// d loss / d log_prob_new.
  double grad_log_prob = 0.0;
  /// The clipped branch was selected and saturated.
  bool clipped = false;
};

/// ρ = exp(new − old); objective = min(ρA, clip(ρ, 1−ε, 1+ε)·A); loss = −objective.
PolicyLossTerms policy_loss(double log_prob_new, double log_prob_old, double advantage, double epsilon);

/// Mean squared error. If `grad` is non-empty it receives d loss / d value.
double critic_loss(std::span<const double> values, std::span<const double> targets, std::span<double> grad = {});

/// evaluator <- β·critic + (1 − β)·evaluator. β in (0, 1].
void soft_update_evaluator(const Mlp& critic, Mlp& evaluator, double beta);

/// Batch-mean clipped-surrogate loss of the actor over `records`, with the
/// parameter gradient added into `grad` when it is non-empty.
double actor_batch_loss(const PolicyHead& actor, std::span<const TransitionRecord* const> records,
                        std::span<const double> advantages, double epsilon, std::span<double> grad = {});

/// Batch-mean squared error between critic values and stored returns-to-go,
/// with the parameter gradient added into `grad` when it is non-empty.
double critic_batch_loss(const ValueFunction& critic, std::span<const TransitionRecord* const> records,
                         std::span<double> grad = {});

/// Trainable state: networks, optimizers, replay buffer and progress.
struct Agent {
  BoardShape shape;
  PolicyHead actor;
  ValueFunction critic;
  ValueFunction evaluator;
  AdamState actor_optimizer;
  AdamState critic_optimizer;
  ReplayBuffer buffer;
  std::uint64_t seed = 0;
  int iterations_done = 0;

  /// Fresh agent; the evaluator starts as a copy of the critic.
  static Agent create(BoardShape shape, const TrainConfig& config, std::uint64_t seed);

  Checkpoint to_checkpoint() const;
  static Agent from_checkpoint(const Checkpoint& ckpt);
  void save(const std::filesystem::path& path) const;
  static Agent load(const std::filesystem::path& path);
};

struct EpisodeLog {
  int episode = 0;
  int swaps = 0;
  double total_reward = 0.0;
  bool perfect = false;
  std::array<int, kActionKinds> kind_mix{};

  nlohmann::json to_json() const;
};

using PerceptionFactory = std::function<std::unique_ptr<PerceptionModel>(const PuzzleSpec&, std::uint64_t seed)>;

struct TrainRun {
  /// Stop after this many iterations in this call (< 0 runs to completion);
  /// lets callers checkpoint part-way and resume.
  int stop_after = -1;
  std::function<void(const EpisodeLog&)> on_episode;
};

/// Continues training `agent` from agent.iterations_done to config.iterations.
/// Rewards use the ground truth; the actor observes perception features.
/// Iteration k draws everything from a generator seeded by (agent.seed, k),
/// so resuming from a checkpoint replays an uninterrupted run exactly.
std::vector<EpisodeLog> train(Agent& agent, std::span<const PuzzleInstance> instances,
                              const PerceptionFactory& perception, const EvidenceWeights& weights,
                              const TrainConfig& config, const EvoConfig& evo, const RewardParams& reward,
                              const TrainRun& run = {});

struct SolveOptions {
  int max_swaps = 500;
  /// Stop once this many evidence evaluations are spent (0: unlimited).
  std::uint64_t max_evaluations = 0;
  std::uint64_t seed = 0;
};

/// Test-time loop without parameter updates. Lookahead uses the perceived
/// reward, stopping when perception reports a perfect assembly; otherwise the
/// placement with the highest aggregate evidence seen is returned.
SolveResult solve(const Agent& agent, const PuzzleSpec& spec, const Permutation& initial,
                  const PerceptionModel& perception, const EvidenceWeights& weights, const TrainConfig& config,
                  const EvoConfig& evo, const RewardParams& reward, const SolveOptions& options);

}  // namespace jigsaw
