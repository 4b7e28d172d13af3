#include "jigsaw/baselines.hpp"

#include <algorithm>
#include <limits>

#include "jigsaw/error.hpp"

namespace jigsaw {

void TabuConfig::validate() const {
  if (tenure < 1) throw ValidationError("tabu tenure must be >= 1");
  if (max_iterations < 0) throw ValidationError("tabu iterations must be >= 0");
}

void GaConfig::validate() const {
  if (population < 2) throw ValidationError("GA population must be >= 2");
  if (generations < 0) throw ValidationError("GA generations must be >= 0");
  if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) throw ValidationError("GA crossover rate must be in [0, 1]");
  if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) throw ValidationError("GA mutation rate must be in [0, 1]");
  if (elite < 0 || elite >= population) throw ValidationError("GA elite count must be in [0, population)");
  if (tournament < 1) throw ValidationError("GA tournament size must be >= 1");
}

namespace {

bool budget_spent(const EvidenceEvaluator& ev, std::uint64_t cap) { return cap > 0 && ev.evaluations() >= cap; }

void check_inputs(const PuzzleSpec& spec, const Permutation& initial) {
  if (initial.size() != spec.shape().cells()) throw ValidationError("initial placement does not match the puzzle");
}

SolveResult finish(const PuzzleSpec& spec, std::vector<int> best, std::vector<Action> actions,
                   const EvidenceEvaluator& ev, int steps) {
  SolveResult r;
  r.final_state = Permutation(std::move(best));
  r.actions = std::move(actions);
  r.metrics = metrics(r.final_state, spec.shape());
  r.evaluations = ev.evaluations();
  r.steps = steps;
  return r;
}

}  // namespace

SolveResult greedy_solve(const PuzzleSpec& spec, const Permutation& initial, const PerceptionModel& model,
                         const EvidenceWeights& weights, const GreedyConfig& config, std::vector<double>* trace) {
  check_inputs(spec, initial);
  EvidenceEvaluator ev(spec, model, weights);
  const int n = spec.shape().cells();
  std::vector<int> pl = initial.values();
  double current = ev.aggregate(pl);
  if (trace) trace->assign(1, current);
  std::vector<Action> actions;
  int steps = 0;
  while (config.max_steps <= 0 || steps < config.max_steps) {
    double best = current;
    int bp = -1, bq = -1;
    for (int p = 0; p < n && !budget_spent(ev, config.max_evaluations); ++p) {
      for (int q = p + 1; q < n; ++q) {
        std::swap(pl[p], pl[q]);
        const double e = ev.aggregate(pl);
        std::swap(pl[p], pl[q]);
        if (e > best) {
          best = e;
          bp = p;
          bq = q;
        }
      }
    }
    if (bp < 0) break;
    std::swap(pl[bp], pl[bq]);
    current = best;
    actions.push_back(Action::swap2(bp, bq));
    ++steps;
    if (trace) trace->push_back(current);
  }
  return finish(spec, std::move(pl), std::move(actions), ev, steps);
}

SolveResult tabu_solve(const PuzzleSpec& spec, const Permutation& initial, const PerceptionModel& model,
                       const EvidenceWeights& weights, const TabuConfig& config, std::vector<double>* trace) {
  config.validate();
  check_inputs(spec, initial);
  EvidenceEvaluator ev(spec, model, weights);
  Rng rng(config.seed);
  const int n = spec.shape().cells();
  std::vector<int> pl = initial.values();
  std::vector<int> best_pl = pl;
  double best_e = ev.aggregate(pl);
  if (trace) trace->assign(1, best_e);
  // tabu_until[p * n + q]: first iteration at which the pair is free again.
  std::vector<int> tabu_until(static_cast<std::size_t>(n) * n, 0);
  std::vector<Action> actions;
  std::size_t best_len = 0;
  int it = 0;
  for (; it < config.max_iterations && !budget_spent(ev, config.max_evaluations); ++it) {
    double move_e = -std::numeric_limits<double>::infinity();
    int mp = -1, mq = -1, ties = 0;
    int fallback_p = -1, fallback_q = -1, fallback_until = std::numeric_limits<int>::max();
    double fallback_e = 0.0;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        std::swap(pl[p], pl[q]);
        const double e = ev.aggregate(pl);
        std::swap(pl[p], pl[q]);
        const int until = tabu_until[static_cast<std::size_t>(p) * n + q];
        if (until > it && !(e > best_e)) {
          if (until < fallback_until) {
            fallback_until = until;
            fallback_p = p;
            fallback_q = q;
            fallback_e = e;
          }
          continue;
        }
        if (e > move_e) {
          move_e = e;
          mp = p;
          mq = q;
          ties = 1;
        } else if (e == move_e && rng.below(static_cast<std::uint64_t>(++ties)) == 0) {
          mp = p;
          mq = q;
        }
      }
    }
    if (mp < 0) {
      mp = fallback_p;
      mq = fallback_q;
      move_e = fallback_e;
    }
    std::swap(pl[mp], pl[mq]);
    actions.push_back(Action::swap2(mp, mq));
    tabu_until[static_cast<std::size_t>(mp) * n + mq] = it + 1 + config.tenure;
    if (move_e > best_e) {
      best_e = move_e;
      best_pl = pl;
      best_len = actions.size();
    }
    if (trace) trace->push_back(best_e);
  }
  actions.resize(best_len);
  return finish(spec, std::move(best_pl), std::move(actions), ev, it);
}

Permutation order_crossover(const Permutation& a, const Permutation& b, Rng& rng) {
  const int n = a.size();
  if (b.size() != n) throw ValidationError("crossover parents differ in size");
  int lo = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
  int hi = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
  if (lo > hi) std::swap(lo, hi);
  std::vector<int> child(static_cast<std::size_t>(n), -1);
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  for (int i = lo; i <= hi; ++i) {
    child[i] = a[i];
    used[a[i]] = 1;
  }
  int w = (hi + 1) % n;
  for (int k = 0; k < n; ++k) {
    const int gene = b[(hi + 1 + k) % n];
    if (used[gene]) continue;
    child[w] = gene;
    used[gene] = 1;
    w = (w + 1) % n;
  }
  return Permutation(std::move(child));
}

Permutation swap_mutation(const Permutation& p, double rate, Rng& rng) {
  std::vector<int> v = p.values();
  const auto n = static_cast<std::uint64_t>(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (rng.bernoulli(rate)) std::swap(v[i], v[rng.below(n)]);
  }
  return Permutation(std::move(v));
}

std::vector<Action> swap_sequence(const Permutation& from, const Permutation& to) {
  const int n = from.size();
  if (to.size() != n) throw ValidationError("permutations differ in size");
  std::vector<int> cur = from.values();
  std::vector<int> where(static_cast<std::size_t>(n));
  for (int p = 0; p < n; ++p) where[cur[p]] = p;
  std::vector<Action> out;
  for (int p = 0; p < n; ++p) {
    if (cur[p] == to[p]) continue;
    const int q = where[to[p]];
    out.push_back(Action::swap2(p, q));
    std::swap(cur[p], cur[q]);
    where[cur[p]] = p;
    where[cur[q]] = q;
  }
  return out;
}

SolveResult ga_solve(const PuzzleSpec& spec, const Permutation& initial, const PerceptionModel& model,
                     const EvidenceWeights& weights, const GaConfig& config, std::vector<double>* trace) {
  config.validate();
  check_inputs(spec, initial);
  EvidenceEvaluator ev(spec, model, weights);
  Rng rng(config.seed);
  const int n = spec.shape().cells();

  struct Individual {
    Permutation genes;
    double fitness;
  };
  auto fitter = [](const Individual& a, const Individual& b) {
    if (a.fitness != b.fitness) return a.fitness > b.fitness;
    return a.genes.values() < b.genes.values();
  };

  std::vector<Individual> pop;
  pop.push_back({initial, ev.aggregate(initial.placement())});
  while (static_cast<int>(pop.size()) < config.population && !budget_spent(ev, config.max_evaluations)) {
    auto p = random_permutation(n, rng);
    const double f = ev.aggregate(p.placement());
    pop.push_back({std::move(p), f});
  }
  std::sort(pop.begin(), pop.end(), fitter);
  Individual best = pop.front();
  if (trace) trace->clear();

  auto tournament = [&]() -> const Individual& {
    std::size_t pick = rng.below(pop.size());
    for (int t = 1; t < config.tournament; ++t) pick = std::min<std::size_t>(pick, rng.below(pop.size()));
    return pop[pick];
  };

  int gen = 0;
  for (; gen < config.generations && !budget_spent(ev, config.max_evaluations); ++gen) {
    std::vector<Individual> next(pop.begin(), pop.begin() + std::min<std::ptrdiff_t>(config.elite, static_cast<std::ptrdiff_t>(pop.size())));
    while (static_cast<int>(next.size()) < config.population && !budget_spent(ev, config.max_evaluations)) {
      const Individual& a = tournament();
      Permutation child = rng.bernoulli(config.crossover_rate) ? order_crossover(a.genes, tournament().genes, rng)
                                                                : a.genes;
      child = swap_mutation(child, config.mutation_rate, rng);
      const double f = ev.aggregate(child.placement());
      next.push_back({std::move(child), f});
    }
    // A generation cut short by the budget keeps the survivors of the last one.
    for (std::size_t i = next.size(); i < pop.size() && static_cast<int>(next.size()) < config.population; ++i) {
      next.push_back(pop[i]);
    }
    pop = std::move(next);
    std::sort(pop.begin(), pop.end(), fitter);
    if (fitter(pop.front(), best)) best = pop.front();
    if (trace) trace->push_back(pop.front().fitness);
  }
  return finish(spec, best.genes.values(), swap_sequence(initial, best.genes), ev, gen);
}

}  // namespace jigsaw
