#include "jigsaw/agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "jigsaw/error.hpp"

namespace jigsaw {

void TrainConfig::validate() const {
  if (iterations < 1) throw ValidationError("training iterations must be >= 1");
  if (max_swaps < 1) throw ValidationError("max swaps must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("gamma must be in (0, 1)");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) throw ValidationError("clip epsilon must be in (0, 1)");
  if (!(soft_update_beta > 0.0 && soft_update_beta <= 1.0)) throw ValidationError("soft-update beta must be in (0, 1]");
  for (const auto* prior : {&prior_start, &prior_end}) {
    double sum = 0.0;
    for (double w : *prior) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("kind prior entries must be finite and >= 0");
      sum += w;
    }
    if (sum <= 0.0) throw ValidationError("kind prior must have a positive entry");
  }
  if (buffer_capacity < 1) throw ValidationError("buffer capacity must be >= 1");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (update_epochs < 0) throw ValidationError("update epochs must be >= 0");
  if (!(actor_learning_rate > 0.0) || !(critic_learning_rate > 0.0)) throw ValidationError("learning rates must be > 0");
  if (!(grad_clip > 0.0)) throw ValidationError("gradient clip must be > 0");
  if (std::find(hidden.begin(), hidden.end(), 0u) != hidden.end() ||
      std::find(critic_hidden.begin(), critic_hidden.end(), 0u) != critic_hidden.end()) throw ValidationError("hidden layers must be non-empty");
  if (!(value_scale > 0.0)) throw ValidationError("value scale must be > 0");
  if (stagnation_patience < 0 || escape_burst < 0) throw ValidationError("stagnation settings must be >= 0");
  if (tabu_states < 0) throw ValidationError("tabu states must be >= 0");
}

KindPrior scheduled_prior(const TrainConfig& config, int iteration) {
  const double t = config.iterations > 1 ? static_cast<double>(iteration) / (config.iterations - 1) : 0.0;
  return blend_prior(config.prior_start, config.prior_end, t);
}

std::vector<double> returns_to_go(std::span<const double> rewards, double gamma, double tail) {
  std::vector<double> out(rewards.size());
  double acc = tail;
  for (std::size_t i = rewards.size(); i-- > 0;) out[i] = acc = rewards[i] + gamma * acc;
  return out;
}

// ---------------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ < 1) throw ValidationError("buffer capacity must be >= 1");
}

void ReplayBuffer::push(Trajectory trajectory) {
  if (trajectory.empty()) return;
  if (episodes_.size() == capacity_) {
    records_ -= episodes_.front().size();
    episodes_.pop_front();
  }
  records_ += trajectory.size();
  episodes_.push_back(std::move(trajectory));
}

const TransitionRecord& ReplayBuffer::operator[](std::size_t i) const {
  for (const auto& e : episodes_) {
    if (i < e.size()) return e[i];
    i -= e.size();
  }
  throw ValidationError("replay buffer index out of range");
}

std::vector<std::size_t> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
  std::vector<std::size_t> idx(records_);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const std::size_t take = std::min(batch, idx.size());
  for (std::size_t i = 0; i < take; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
  idx.resize(take);
  return idx;
}

std::vector<Action> ReplayBuffer::recent_actions(std::size_t count) const {
  std::vector<Action> out;
  for (auto e = episodes_.rbegin(); e != episodes_.rend(); ++e) {
    for (auto it = e->rbegin(); it != e->rend(); ++it) {
      if (out.size() >= count) return out;
      out.push_back(it->action);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

double compute_advantage(double reward, double value, double next_value, double gamma, bool done) {
  return reward + (done ? 0.0 : gamma * next_value) - value;
}

PolicyLossTerms policy_loss(double log_prob_new, double log_prob_old, double advantage, double epsilon) {
  PolicyLossTerms t;
  t.ratio = std::exp(log_prob_new - log_prob_old);
  const double unclipped = t.ratio * advantage;
  const double clipped = std::clamp(t.ratio, 1.0 - epsilon, 1.0 + epsilon) * advantage;
  if (unclipped <= clipped) {
    t.objective = unclipped;
    t.grad_log_prob = -unclipped;  // d(ρA)/d log ρ = ρA
  } else {
    t.objective = clipped;
    t.clipped = true;
  }
  t.loss = -t.objective;
  return t;
}

double critic_loss(std::span<const double> values, std::span<const double> targets, std::span<double> grad) {
  if (values.size() != targets.size() || values.empty()) throw ValidationError("critic loss needs matching, non-empty inputs");
  if (!grad.empty() && grad.size() != values.size()) throw ValidationError("critic gradient buffer has wrong size");
  const double n = static_cast<double>(values.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - targets[i];
    loss += d * d / n;
    if (!grad.empty()) grad[i] = 2.0 * d / n;
  }
  return loss;
}

void soft_update_evaluator(const Mlp& critic, Mlp& evaluator, double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) throw ValidationError("soft-update beta must be in (0, 1]");
  if (critic.layer_sizes() != evaluator.layer_sizes()) throw ValidationError("critic and evaluator shapes differ");
  blend_parameters(critic.parameters(), evaluator.parameters(), beta);
}

double actor_batch_loss(const PolicyHead& actor, std::span<const TransitionRecord* const> records,
                        std::span<const double> advantages, double epsilon, std::span<double> grad) {
  if (records.empty() || records.size() != advantages.size()) throw ValidationError("actor batch needs one advantage per record");
  const double n = static_cast<double>(records.size());
  double loss = 0.0;
  Mlp::Trace trace;
  std::vector<double> logit_grad;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = *records[i];
    const auto dist = actor.distribution(r.features, r.prior, trace);
    logit_grad.assign(PolicyHead::output_size(actor.shape()), 0.0);
    const double lp = dist.log_prob(r.action, logit_grad);
    const auto terms = policy_loss(lp, r.log_prob_old, advantages[i], epsilon);
    loss += terms.loss / n;
    if (grad.empty() || terms.grad_log_prob == 0.0) continue;
    for (double& g : logit_grad) g *= terms.grad_log_prob / n;
    actor.net().accumulate_gradient(trace, logit_grad, grad);
  }
  return loss;
}

double critic_batch_loss(const ValueFunction& critic, std::span<const TransitionRecord* const> records,
                         std::span<double> grad) {
  if (records.empty()) throw ValidationError("critic batch is empty");
  std::vector<double> values(records.size()), targets(records.size()), dvalues(records.size());
  std::vector<Mlp::Trace> traces(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    critic.net.forward(critic.input(records[i]->features), traces[i]);
    values[i] = critic.scale * traces[i].output()[0];
    targets[i] = records[i]->return_to_go;
  }
  const double loss = critic_loss(values, targets, dvalues);
  if (!grad.empty()) {
    for (std::size_t i = 0; i < records.size(); ++i) {
      const double upstream = dvalues[i] * critic.scale;
      critic.net.accumulate_gradient(traces[i], std::span<const double>(&upstream, 1), grad);
    }
  }
  return loss;
}

// ---------------------------------------------------------------------------

Agent Agent::create(BoardShape shape, const TrainConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(hash_combine(seed, 0x1717));
  Agent a{shape,
          PolicyHead::create(shape, config.hidden, rng),
          config.critic_summary
              ? ValueFunction::create_summary(shape, config.critic_hidden, rng, config.value_scale)
              : ValueFunction::create(feature_count(shape), config.critic_hidden, rng, config.value_scale),
          {},
          {},
          {},
          ReplayBuffer(config.buffer_capacity),
          seed,
          0};
  a.evaluator = a.critic;
  a.actor_optimizer = AdamState::for_parameters(a.actor.net().parameter_count(), config.actor_learning_rate);
  a.critic_optimizer = AdamState::for_parameters(a.critic.net.parameter_count(), config.critic_learning_rate);
  return a;
}

namespace {

constexpr int kRecordTail = 12;

std::size_t record_width(BoardShape shape) { return 2 * feature_count(shape) + kRecordTail; }

}  // namespace

Checkpoint Agent::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.header["format"] = "jigsaw-agent";
  ckpt.header["version"] = 1;
  ckpt.header["rows"] = shape.rows;
  ckpt.header["cols"] = shape.cols;
  ckpt.header["seed"] = seed;
  ckpt.header["iterations_done"] = iterations_done;
  ckpt.header["step_count"] = actor_optimizer.step;
  ckpt.header["value_scale"] = std::bit_cast<std::uint64_t>(critic.scale);
  ckpt.header["critic_input"] = critic.summary ? "summary" : "full";
  ckpt.header["buffer_capacity"] = buffer.capacity();
  std::vector<std::size_t> lengths;
  for (std::size_t i = 0; i < buffer.trajectories(); ++i) lengths.push_back(buffer.trajectory(i).size());
  ckpt.header["buffer_trajectories"] = lengths;
  store_mlp(ckpt, "actor", actor.net());
  store_mlp(ckpt, "critic", critic.net);
  store_mlp(ckpt, "evaluator", evaluator.net);
  store_adam(ckpt, "actor_adam", actor_optimizer);
  store_adam(ckpt, "critic_adam", critic_optimizer);

  std::vector<double> flat;
  flat.reserve(buffer.size() * record_width(shape));
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const auto& r = buffer[i];
    flat.insert(flat.end(), r.features.begin(), r.features.end());
    flat.insert(flat.end(), r.next_features.begin(), r.next_features.end());
    flat.push_back(static_cast<double>(r.action.kind));
    for (int p : r.action.pos) flat.push_back(p);
    flat.push_back(r.action.forward ? 1.0 : 0.0);
    flat.push_back(r.reward);
    flat.push_back(r.done ? 1.0 : 0.0);
    flat.push_back(r.log_prob_old);
    flat.insert(flat.end(), r.prior.begin(), r.prior.end());
    flat.push_back(r.return_to_go);
  }
  ckpt.add("buffer", flat);
  return ckpt;
}

Agent Agent::from_checkpoint(const Checkpoint& ckpt) {
  const auto& h = ckpt.header;
  if (h.value("format", "") != "jigsaw-agent") throw DataError("checkpoint is not an agent checkpoint");
  try {
    const BoardShape shape{h.at("rows").get<int>(), h.at("cols").get<int>()};
    const double scale = std::bit_cast<double>(h.at("value_scale").get<std::uint64_t>());
    Agent a{shape,
            PolicyHead(shape, load_mlp(ckpt, "actor")),
            ValueFunction{load_mlp(ckpt, "critic"), scale, std::nullopt},
            ValueFunction{load_mlp(ckpt, "evaluator"), scale, std::nullopt},
            load_adam(ckpt, "actor_adam"),
            load_adam(ckpt, "critic_adam"),
            ReplayBuffer(h.at("buffer_capacity").get<std::size_t>()),
            h.at("seed").get<std::uint64_t>(),
            h.at("iterations_done").get<int>()};
    const auto& flat = ckpt.block("buffer").values;
    const std::size_t width = record_width(shape);
    const auto lengths = h.at("buffer_trajectories").get<std::vector<std::size_t>>();
    std::size_t count = 0;
    for (auto n : lengths) count += n;
    if (flat.size() != count * width) throw DataError("checkpoint buffer block has wrong size");
    const std::size_t nf = feature_count(shape);
    Trajectory episode;
    std::size_t episode_index = 0;
    for (std::size_t i = 0; i < count; ++i) {
      const double* x = flat.data() + i * width;
      TransitionRecord r;
      r.features.assign(x, x + nf);
      r.next_features.assign(x + nf, x + 2 * nf);
      x += 2 * nf;
      r.action.kind = static_cast<ActionKind>(static_cast<int>(x[0]));
      r.action.pos = {static_cast<int>(x[1]), static_cast<int>(x[2]), static_cast<int>(x[3])};
      r.action.forward = x[4] != 0.0;
      r.reward = x[5];
      r.done = x[6] != 0.0;
      r.log_prob_old = x[7];
      r.prior = {x[8], x[9], x[10]};
      r.return_to_go = x[11];
      validate_action(r.action, shape);
      episode.push_back(std::move(r));
      if (episode.size() == lengths[episode_index]) {
        a.buffer.push(std::move(episode));
        episode.clear();
        ++episode_index;
      }
    }
    if (a.critic.net.layer_sizes() != a.evaluator.net.layer_sizes()) throw DataError("critic and evaluator shapes differ");
    const std::string input = h.value("critic_input", "full");
    if (input == "summary") {
      a.critic.summary = a.evaluator.summary = shape;
    } else if (input != "full") {
      throw DataError("unknown critic input '" + input + "'");
    }
    const std::size_t expected = a.critic.summary ? ValueFunction::kSummaryInputs : feature_count(shape);
    if (a.critic.net.input_size() != expected) throw DataError("critic input size does not match the board");
    return a;
  } catch (const ValidationError& e) {
    throw DataError(std::string("invalid agent checkpoint: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid agent checkpoint header: ") + e.what());
  }
}

void Agent::save(const std::filesystem::path& path) const { write_checkpoint(path, to_checkpoint()); }

Agent Agent::load(const std::filesystem::path& path) { return from_checkpoint(read_checkpoint(path)); }

nlohmann::json EpisodeLog::to_json() const {
  nlohmann::json j;
  j["episode"] = episode;
  j["swaps"] = swaps;
  j["total_reward"] = total_reward;
  j["perfect"] = perfect;
  j["kind_mix"] = {{"swap2", kind_mix[0]}, {"swap3", kind_mix[1]}, {"swap_puzzlet", kind_mix[2]}};
  return j;
}

// ---------------------------------------------------------------------------

namespace {

struct Acting {
  const Agent& agent;
  StepContext& context;
  const EvidenceEvaluator& evaluator;
  const TrainConfig& config;
  const EvoConfig& evo;
  KindPrior prior;
  int max_swaps;
  std::uint64_t max_evaluations;
  bool want_log_prob;
};

/// Runs the acting loop from `placement` (whose outcome is `current`) until
/// a terminal step, the swap limit or the evaluation budget. Each executed
/// move is reported to `on_step` with the placement already updated.
template <class OnStep>
void run_episode(const Acting& a, std::vector<int>& placement, StepOutcome current, std::vector<Action> history,
                 Rng& rng, OnStep&& on_step) {
  const BoardShape shape = a.context.shape();
  const auto history_cap = static_cast<std::size_t>(a.evo.history_actions);
  if (history.size() > history_cap) history.resize(history_cap);

  double climb_best = current.reward;
  int stale = 0;
  int burst_left = 0;
  std::vector<Action> parents;
  StateTabu tabu(static_cast<std::size_t>(a.config.tabu_states));
  tabu.visit(placement);

  for (int t = 0; t < a.max_swaps; ++t) {
    if (a.max_evaluations > 0 && a.evaluator.evaluations() >= a.max_evaluations) break;
    TransitionRecord rec;
    StepOutcome next;
    if (burst_left > 0) {
      rec.prior = a.config.prior_start;
      rec.action = a.agent.actor.distribution(current.features, rec.prior).sample(rng).action;
      apply_action_unchecked(placement, rec.action, shape.cols);
      next = a.context.evaluate(placement);
      if (--burst_left == 0) {
        climb_best = -std::numeric_limits<double>::infinity();
        stale = 0;
      }
    } else {
      rec.prior = a.prior;
      parents.clear();
      if (a.evo.actor_samples > 0) {
        for (const auto& s : sample_actions(a.agent.actor, current.features, static_cast<std::size_t>(a.evo.actor_samples),
                                            a.prior, rng)) {
          parents.push_back(s.action);
        }
      }
      parents.insert(parents.end(), history.begin(), history.end());
      if (parents.empty()) parents.push_back(random_action(shape, rng));
      auto res = evolve_action(parents, placement, a.context, a.agent.evaluator, a.config.gamma, a.evo, rng,
                               RolloutPolicy{&a.agent.actor, a.prior}, a.config.tabu_states > 0 ? &tabu : nullptr);
      rec.action = res.action;
      apply_action_unchecked(placement, rec.action, shape.cols);
      next = std::move(res.outcome);
      if (next.reward > climb_best) {
        climb_best = next.reward;
        stale = 0;
      } else if (a.config.stagnation_patience > 0 && ++stale >= a.config.stagnation_patience) {
        burst_left = a.config.escape_burst;
        stale = 0;
      }
    }
    tabu.visit(placement);
    if (a.want_log_prob) rec.log_prob_old = a.agent.actor.distribution(current.features, rec.prior).log_prob(rec.action);
    rec.features = std::move(current.features);
    rec.reward = next.reward;
    rec.next_features = next.features;
    rec.done = next.terminal;
    history.insert(history.begin(), rec.action);
    if (history.size() > history_cap) history.pop_back();
    current = next;
    on_step(std::move(rec), current);
    if (current.terminal) break;
  }
}

void update_networks(Agent& agent, const TrainConfig& config, Rng& rng, int iteration) {
  if (agent.buffer.empty()) return;
  std::vector<double> actor_grad(agent.actor.net().parameter_count());
  std::vector<double> critic_grad(agent.critic.net.parameter_count());
  for (int epoch = 0; epoch < config.update_epochs; ++epoch) {
    const auto idx = agent.buffer.sample(config.batch_size, rng);
    std::vector<const TransitionRecord*> batch;
    std::vector<double> advantages;
    for (std::size_t i : idx) {
      const auto& r = agent.buffer[i];
      batch.push_back(&r);
      advantages.push_back(compute_advantage(r.reward, agent.critic(r.features), agent.critic(r.next_features),
                                             config.gamma, r.done));
    }
    std::fill(actor_grad.begin(), actor_grad.end(), 0.0);
    std::fill(critic_grad.begin(), critic_grad.end(), 0.0);
    const double la = actor_batch_loss(agent.actor, batch, advantages, config.clip_epsilon, actor_grad);
    const double lc = critic_batch_loss(agent.critic, batch, critic_grad);
    if (!std::isfinite(la) || !std::isfinite(lc)) {
      std::ostringstream msg;
      msg << "non-finite loss at iteration " << iteration << " epoch " << epoch << ": actor=" << la << " critic=" << lc
          << " batch=" << batch.size() << " optimizer_step=" << agent.actor_optimizer.step;
      throw NumericError(msg.str());
    }
    clip_grad_norm(actor_grad, config.grad_clip);
    clip_grad_norm(critic_grad, config.grad_clip);
    adam_step(agent.actor.net().parameters(), actor_grad, agent.actor_optimizer);
    adam_step(agent.critic.net.parameters(), critic_grad, agent.critic_optimizer);
  }
  soft_update_evaluator(agent.critic.net, agent.evaluator.net, config.soft_update_beta);
  if (!agent.actor.net().all_finite() || !agent.critic.net.all_finite()) {
    throw NumericError("non-finite parameters after update at iteration " + std::to_string(iteration));
  }
}

}  // namespace

std::vector<EpisodeLog> train(Agent& agent, std::span<const PuzzleInstance> instances,
                              const PerceptionFactory& perception, const EvidenceWeights& weights,
                              const TrainConfig& config, const EvoConfig& evo, const RewardParams& reward,
                              const TrainRun& run) {
  config.validate();
  evo.validate();
  reward.validate();
  if (instances.empty()) throw ValidationError("training needs at least one puzzle");
  weights.validate(agent.shape);
  std::vector<std::unique_ptr<PerceptionModel>> models;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (instances[i].spec.shape() != agent.shape) throw ValidationError("puzzle " + instances[i].id + " does not match the agent's board");
    models.push_back(perception(instances[i].spec, hash_combine(agent.seed, 0x5eed0000 + i)));
  }

  std::vector<EpisodeLog> logs;
  const int end = run.stop_after < 0 ? config.iterations
                                     : std::min(config.iterations, agent.iterations_done + run.stop_after);
  for (int k = agent.iterations_done; k < end; ++k) {
    Rng rng(hash_combine(agent.seed, static_cast<std::uint64_t>(k)));
    const std::size_t pick = rng.below(instances.size());
    const auto& inst = instances[pick];
    std::vector<int> placement = inst.initial.values();
    if (config.reshuffle) {
      do {
        placement = random_permutation(agent.shape.cells(), rng).values();
      } while (Permutation(placement).is_identity());
    }

    EvidenceEvaluator evaluator(inst.spec, *models[pick], weights);
    GroundTruthContext context(evaluator, reward);
    const Acting acting{agent, context, evaluator, config, evo, scheduled_prior(config, k), config.max_swaps, 0, true};

    EpisodeLog log;
    log.episode = k;
    Trajectory trajectory;
    run_episode(acting, placement, context.evaluate(placement), agent.buffer.recent_actions(evo.history_actions), rng,
                [&](TransitionRecord&& rec, const StepOutcome& outcome) {
                  ++log.swaps;
                  log.total_reward += rec.reward;
                  ++log.kind_mix[static_cast<int>(rec.action.kind)];
                  log.perfect = outcome.terminal;
                  trajectory.push_back(std::move(rec));
                });
    std::vector<double> rewards;
    for (const auto& r : trajectory) rewards.push_back(r.reward);
    double tail = 0.0;
    if (config.bootstrap_truncated && !trajectory.empty() && !trajectory.back().done) {
      tail = agent.evaluator(trajectory.back().next_features);
    }
    const auto rtg = returns_to_go(rewards, config.gamma, tail);
    for (std::size_t i = 0; i < trajectory.size(); ++i) trajectory[i].return_to_go = rtg[i];
    agent.buffer.push(std::move(trajectory));

    update_networks(agent, config, rng, k);
    agent.iterations_done = k + 1;
    if (run.on_episode) run.on_episode(log);
    logs.push_back(log);
  }
  return logs;
}

SolveResult solve(const Agent& agent, const PuzzleSpec& spec, const Permutation& initial,
                  const PerceptionModel& perception, const EvidenceWeights& weights, const TrainConfig& config,
                  const EvoConfig& evo, const RewardParams& reward, const SolveOptions& options) {
  config.validate();
  evo.validate();
  if (spec.shape() != agent.shape) throw ValidationError("puzzle does not match the agent's board");
  if (initial.size() != spec.shape().cells()) throw ValidationError("initial placement does not match the puzzle");
  if (options.max_swaps < 0) throw ValidationError("max swaps must be >= 0");

  EvidenceEvaluator evaluator(spec, perception, weights);
  PerceivedContext context(evaluator, reward);
  Rng rng(options.seed);

  std::vector<int> placement = initial.values();
  StepOutcome start = context.evaluate(placement);
  SolveResult result;
  std::vector<int> best = placement;
  double best_evidence = start.evidence;
  std::size_t best_len = 0;
  bool finished = start.terminal;

  if (!finished) {
    const Acting acting{agent, context, evaluator, config, evo, config.prior_end, options.max_swaps,
                        options.max_evaluations, false};
    run_episode(acting, placement, std::move(start), agent.buffer.recent_actions(evo.history_actions), rng,
                [&](TransitionRecord&& rec, const StepOutcome& outcome) {
                  result.actions.push_back(rec.action);
                  ++result.steps;
                  if (outcome.terminal) finished = true;
                  if (outcome.evidence > best_evidence) {
                    best_evidence = outcome.evidence;
                    best = placement;
                    best_len = result.actions.size();
                  }
                });
  }
  if (finished) {
    best = placement;
  } else {
    result.actions.resize(best_len);
  }
  result.final_state = Permutation(best);
  result.metrics = metrics(result.final_state, spec.shape());
  result.evaluations = evaluator.evaluations();
  return result;
}

}  // namespace jigsaw
