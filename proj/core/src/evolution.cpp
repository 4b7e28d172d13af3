#include "jigsaw/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "jigsaw/error.hpp"

namespace jigsaw {

void EvoConfig::validate() const {
  if (iterations < 1) throw ValidationError("evolution iterations must be >= 1");
  if (population < 2) throw ValidationError("evolution population must be >= 2");
  if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) throw ValidationError("crossover rate must be in [0, 1]");
  if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) throw ValidationError("mutation rate must be in [0, 1]");
  if (elite < 1 || elite >= population) throw ValidationError("elite count must be in [1, population)");
  if (tournament < 1) throw ValidationError("tournament size must be >= 1");
  if (actor_samples < 0 || history_actions < 0) throw ValidationError("parent counts must be >= 0");
  if (actor_samples + history_actions < 1) throw ValidationError("at least one parent source is required");
  if (rollout_depth < 1) throw ValidationError("rollout depth must be >= 1");
}

ValueFunction ValueFunction::create(std::size_t inputs, const std::vector<std::size_t>& hidden, Rng& rng,
                                    double scale) {
  std::vector<std::size_t> sizes{inputs};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return ValueFunction{Mlp::glorot(sizes, rng, 0.0), scale, std::nullopt};
}

ValueFunction ValueFunction::create_summary(BoardShape shape, const std::vector<std::size_t>& hidden, Rng& rng,
                                            double scale) {
  auto v = create(kSummaryInputs, hidden, rng, scale);
  v.summary = shape;
  return v;
}

std::vector<double> ValueFunction::input(std::span<const double> features) const {
  if (!summary) return {features.begin(), features.end()};
  const int r = summary->rows, c = summary->cols;
  const std::size_t nh = static_cast<std::size_t>(r * (c - 1)), nv = static_cast<std::size_t>((r - 1) * c),
                    nq = static_cast<std::size_t>((r - 1) * (c - 1));
  if (features.size() != 1 + nh + nv + nq) throw ValidationError("feature vector does not match the value summary");
  auto mean = [&](std::size_t from, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += features[from + i];
    return s / static_cast<double>(n);
  };
  return {features[0], mean(1, nh), mean(1 + nh, nv), mean(1 + nh + nv, nq)};
}

// ---------------------------------------------------------------------------

GroundTruthContext::GroundTruthContext(EvidenceEvaluator& evaluator, RewardParams params)
    : evaluator_(evaluator), params_(params) {
  params_.validate();
}

StepOutcome GroundTruthContext::evaluate(std::span<const int> placement) {
  const auto m = metrics(placement, evaluator_.spec().shape());
  const auto report = evaluator_.evaluate(placement);
  return {reward_from_metrics(m, params_), state_features(report), m.perfect, report.aggregate};
}

PerceivedContext::PerceivedContext(EvidenceEvaluator& evaluator, RewardParams params)
    : evaluator_(evaluator), params_(params) {
  params_.validate();
}

StepOutcome PerceivedContext::evaluate(std::span<const int> placement) {
  const auto report = evaluator_.evaluate(placement);
  return {perceived_reward(report, evaluator_.weights(), params_), state_features(report), perceived_perfect(report),
          report.aggregate};
}

double perceived_reward(const EvidenceReport& report, const EvidenceWeights& weights, const RewardParams& params) {
  const double absolute = report.aggregate / weights.total();
  const double neighbor = perceived_neighbor_fraction(report);
  const double base = params.alpha * absolute + (1.0 - params.alpha) * neighbor;
  return base + (perceived_perfect(report) ? params.perfect_bonus : -params.step_penalty_b);
}

void StateTabu::visit(std::span<const int> placement) {
  if (capacity_ == 0) return;
  const auto h = placement_hash(placement);
  order_.push_back(h);
  ++counts_[h];
  if (order_.size() > capacity_) {
    const auto old = order_.front();
    order_.pop_front();
    if (--counts_[old] == 0) counts_.erase(old);
  }
}

bool StateTabu::contains(std::span<const int> placement) const {
  return !counts_.empty() && counts_.count(placement_hash(placement)) > 0;
}

// ---------------------------------------------------------------------------

namespace {

int random_cell(BoardShape shape, Rng& rng) { return static_cast<int>(rng.below(static_cast<std::uint64_t>(shape.cells()))); }

int random_anchor(BoardShape shape, Rng& rng) {
  return shape.index(rng.uniform_int(0, shape.rows - 2), rng.uniform_int(0, shape.cols - 2));
}

int clamp_to_anchor(BoardShape shape, int p) {
  if (!shape.contains(p)) return 0;
  return shape.index(std::min(shape.row(p), shape.rows - 2), std::min(shape.col(p), shape.cols - 2));
}

std::uint64_t action_key(const Action& a) {
  std::uint64_t h = static_cast<std::uint64_t>(a.kind);
  for (int p : a.pos) h = hash_combine(h, static_cast<std::uint64_t>(p + 1));
  return hash_combine(h, a.forward ? 1 : 0);
}

struct Scored {
  Action action;
  Action canon;
  double score;
};

bool better(const Scored& a, const Scored& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.canon < b.canon;
}

}  // namespace

Action repair(Action a, BoardShape shape, Rng& rng) {
  if (a.kind == ActionKind::SwapPuzzlet) {
    const auto partnered = partnered_anchors(shape);
    if (partnered.empty()) throw ValidationError("board admits no puzzlet swap");
    a.pos[2] = -1;
    a.pos[0] = clamp_to_anchor(shape, a.pos[0]);
    if (std::find(partnered.begin(), partnered.end(), a.pos[0]) == partnered.end()) {
      a.pos[0] = partnered[rng.below(partnered.size())];
    }
    a.pos[1] = clamp_to_anchor(shape, a.pos[1]);
    if (!anchors_disjoint(a.pos[0], a.pos[1], shape.cols)) {
      std::vector<int> partners;
      disjoint_anchors(shape, a.pos[0], partners);
      a.pos[1] = partners[rng.below(partners.size())];
    }
    a.forward = true;
    return a;
  }
  const int n = a.arity();
  for (int i = n; i < 3; ++i) a.pos[i] = -1;
  if (a.kind == ActionKind::Swap2) a.forward = true;
  for (int i = 0; i < n; ++i) {
    auto clash = [&](int p) {
      if (!shape.contains(p)) return true;
      for (int j = 0; j < i; ++j) {
        if (a.pos[j] == p) return true;
      }
      return false;
    };
    while (clash(a.pos[i])) a.pos[i] = random_cell(shape, rng);
  }
  return a;
}

Action random_action(BoardShape shape, Rng& rng) {
  const bool puzzlets = !partnered_anchors(shape).empty();
  const auto kind = static_cast<ActionKind>(rng.below(puzzlets ? 3 : 2));
  Action a;
  a.kind = kind;
  if (kind == ActionKind::SwapPuzzlet) {
    a.pos = {random_anchor(shape, rng), random_anchor(shape, rng), -1};
  } else {
    a.pos = {random_cell(shape, rng), random_cell(shape, rng), random_cell(shape, rng)};
    a.forward = rng.bernoulli(0.5);
  }
  return repair(a, shape, rng);
}

Action crossover(const Action& a, const Action& b, BoardShape shape, Rng& rng) {
  const bool kind_from_a = rng.bernoulli(0.5);
  const Action& base = kind_from_a ? a : b;
  const Action& other = kind_from_a ? b : a;
  Action child = base;
  for (int i = 0; i < child.arity(); ++i) {
    if (rng.bernoulli(0.5) && other.pos[i] >= 0) child.pos[i] = other.pos[i];
  }
  return repair(child, shape, rng);
}

Action mutate(const Action& a, BoardShape shape, double rate, Rng& rng) {
  Action child = a;
  for (int i = 0; i < child.arity(); ++i) {
    if (rng.bernoulli(rate)) {
      child.pos[i] = child.kind == ActionKind::SwapPuzzlet ? random_anchor(shape, rng) : random_cell(shape, rng);
    }
  }
  if (child.kind == ActionKind::Swap3 && rng.bernoulli(rate)) child.forward = !child.forward;
  return repair(child, shape, rng);
}

EvolutionResult evolve_action(std::span<const Action> parents, std::span<const int> placement, StepContext& context,
                              const ValueFunction& evaluator, double gamma, const EvoConfig& config, Rng& rng,
                              const RolloutPolicy& rollout, const StateTabu* tabu) {
  config.validate();
  if (parents.empty()) throw ValidationError("evolution needs at least one parent");
  const BoardShape shape = context.shape();
  if (static_cast<int>(placement.size()) != shape.cells()) throw ValidationError("placement does not match board");
  for (const auto& p : parents) validate_action(p, shape);

  EvolutionResult result;
  const std::uint64_t rollout_seed = rng();

  struct Entry {
    double score;
    StepOutcome outcome;
    bool evaluated;
  };
  std::map<Action, Entry> cache;
  std::vector<int> scratch;

  auto score = [&](const Action& action) -> Scored {
    const Action canon = action.canonical();
    auto it = cache.find(canon);
    if (it == cache.end()) {
      scratch.assign(placement.begin(), placement.end());
      apply_action_unchecked(scratch, canon, shape.cols);
      if (tabu && tabu->contains(scratch)) {
        it = cache.emplace(canon, Entry{-std::numeric_limits<double>::infinity(), {}, false}).first;
        return {action, canon, it->second.score};
      }
      StepOutcome first = context.evaluate(scratch);
      ++result.evaluations;
      double value = first.reward;
      double discount = gamma;
      bool terminal = first.terminal;
      std::vector<double> features = first.features;
      Rng roll(hash_combine(rollout_seed, action_key(canon)));
      for (int depth = 1; depth < config.rollout_depth && !terminal; ++depth) {
        const Action next = rollout.actor ? rollout.actor->distribution(features, rollout.prior).sample(roll).action
                                          : random_action(shape, roll);
        apply_action_unchecked(scratch, next, shape.cols);
        StepOutcome o = context.evaluate(scratch);
        ++result.evaluations;
        value += discount * o.reward;
        discount *= gamma;
        terminal = o.terminal;
        features = std::move(o.features);
      }
      if (!terminal) value += discount * evaluator(features);
      if (!std::isfinite(value)) throw NumericError("non-finite lookahead score");
      it = cache.emplace(canon, Entry{value, std::move(first), true}).first;
    }
    return {action, canon, it->second.score};
  };

  std::vector<Scored> pool;
  pool.reserve(parents.size());
  for (const auto& p : parents) pool.push_back(score(p));
  std::sort(pool.begin(), pool.end(), better);
  result.initial_best_score = pool.front().score;

  const auto S = static_cast<std::size_t>(config.population);
  auto tournament = [&](const std::vector<Scored>& sorted) -> const Scored& {
    std::size_t pick = rng.below(sorted.size());
    for (int t = 1; t < config.tournament; ++t) pick = std::min<std::size_t>(pick, rng.below(sorted.size()));
    return sorted[pick];
  };

  std::vector<Scored> combined;
  for (int z = 0; z < config.iterations; ++z) {
    combined = pool;
    for (std::size_t i = 0; i < S; ++i) {
      const Scored& a = tournament(pool);
      Action child = a.action;
      if (rng.bernoulli(config.crossover_rate)) child = crossover(a.action, tournament(pool).action, shape, rng);
      child = mutate(child, shape, config.mutation_rate, rng);
      combined.push_back(score(child));
    }
    std::sort(combined.begin(), combined.end(), better);
    pool.assign(combined.begin(), combined.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(config.elite, combined.size())));
    while (pool.size() < S) pool.push_back(tournament(combined));
    std::sort(pool.begin(), pool.end(), better);
    result.best_per_iteration.push_back(pool.front().score);
  }

  const Scored& best = pool.front();
  result.action = best.canon;
  result.score = best.score;
  auto& chosen = cache.at(best.canon);
  if (!chosen.evaluated) {
    // every candidate was tabu
    scratch.assign(placement.begin(), placement.end());
    apply_action_unchecked(scratch, best.canon, shape.cols);
    chosen.outcome = context.evaluate(scratch);
    ++result.evaluations;
  }
  result.outcome = chosen.outcome;
  return result;
}

}  // namespace jigsaw
