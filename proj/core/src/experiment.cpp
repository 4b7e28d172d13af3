#include "jigsaw/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "jigsaw/error.hpp"
#include "jigsaw/raster.hpp"

namespace jigsaw {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kSolvers{"evorl", "greedy", "tabu", "ga"};
const std::set<std::string> kPerceptions{"oracle", "pixelstat"};

void allow_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& item : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return item.key() == k; })) {
      throw ConfigError("unknown key '" + item.key() + "' in " + where);
    }
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

InstanceSource parse_source(const json& j, const fs::path& base, const std::string& where) {
  allow_keys(j, {"kind", "image_dir", "instance_dir", "count", "geometries"}, where);
  InstanceSource s;
  read(j, "kind", s.kind);
  if (j.contains("image_dir")) s.image_dir = resolve(base, j.at("image_dir").get<std::string>());
  if (j.contains("instance_dir")) s.instance_dir = resolve(base, j.at("instance_dir").get<std::string>());
  read(j, "count", s.count);
  if (j.contains("geometries")) {
    s.geometries.clear();
    for (const auto& g : j.at("geometries")) {
      allow_keys(g, {"rows", "cols", "fragment_px", "gap_px"}, where + ".geometries[]");
      GeometrySpec spec;
      read(g, "rows", spec.rows);
      read(g, "cols", spec.cols);
      read(g, "fragment_px", spec.fragment_px);
      read(g, "gap_px", spec.gap_px);
      s.geometries.push_back(spec);
    }
  }
  return s;
}

void validate_source(const InstanceSource& s, const std::string& where) {
  if (s.kind == "synthetic") {
    if (s.count < 1) throw ConfigError(where + ".count must be >= 1");
  } else if (s.kind == "images") {
    if (!fs::is_directory(s.image_dir)) throw ConfigError(where + ".image_dir does not exist: " + s.image_dir.string());
  } else if (s.kind == "instances") {
    if (!fs::is_directory(s.instance_dir)) {
      throw ConfigError(where + ".instance_dir does not exist: " + s.instance_dir.string());
    }
  } else {
    throw ConfigError(where + ".kind must be synthetic, images or instances");
  }
  if (s.kind != "instances" && s.geometries.empty()) throw ConfigError(where + ".geometries is empty");
  for (const auto& g : s.geometries) {
    if (g.rows < 2 || g.cols < 2) throw ConfigError(where + ": boards must be at least 2x2");
    if (g.gap_px < 0) throw ConfigError(where + ": gap_px must be >= 0");
    if (s.kind == "synthetic" && g.fragment_px < 8) throw ConfigError(where + ": synthetic puzzles need fragment_px >= 8");
  }
}

KindPrior read_prior(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw ConfigError("kind priors need three entries");
  return {v[0], v[1], v[2]};
}

std::uint64_t name_hash(const std::string& s) {
  return fnv1a64(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

double round_to(double x, double scale) { return std::round(x * scale) / scale; }

std::string fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

template <class F>
void parallel_for(std::size_t n, int workers, F&& body) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || n <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(threads, n); ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<std::uint64_t> train_seeds(std::span<const std::uint64_t> seeds) {
  std::vector<std::uint64_t> out;
  for (auto s : seeds) out.push_back(hash_combine(s, 0x747261696eULL));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

ExperimentConfig ExperimentConfig::from_json(const json& j, const fs::path& base) {
  ExperimentConfig c;
  try {
    allow_keys(j,
               {"seeds", "output_dir", "instances", "train_instances", "perception", "weights", "reward", "solvers",
                "evaluation_budget", "train", "evo", "solve", "greedy", "tabu", "ga", "workers", "emit_images",
                "checkpoint_every", "resume", "checkpoints"},
               "config");
    read(j, "seeds", c.seeds);
    if (j.contains("output_dir")) c.output_dir = resolve(base, j.at("output_dir").get<std::string>());
    if (j.contains("instances")) c.instances = parse_source(j.at("instances"), base, "instances");
    if (j.contains("train_instances")) c.train_instances = parse_source(j.at("train_instances"), base, "train_instances");
    if (j.contains("perception")) {
      const auto& p = j.at("perception");
      allow_keys(p, {"kinds", "oracle", "pixelstat"}, "perception");
      read(p, "kinds", c.perception.kinds);
      if (p.contains("oracle")) {
        allow_keys(p.at("oracle"), {"corruption"}, "perception.oracle");
        read(p.at("oracle"), "corruption", c.perception.oracle_corruption);
      }
      if (p.contains("pixelstat")) {
        const auto& q = p.at("pixelstat");
        allow_keys(q, {"strip_px", "bins", "temperature", "gradient_weight"}, "perception.pixelstat");
        read(q, "strip_px", c.perception.pixelstat.strip_px);
        read(q, "bins", c.perception.pixelstat.bins);
        read(q, "temperature", c.perception.pixelstat.temperature);
        read(q, "gradient_weight", c.perception.pixelstat.gradient_weight);
      }
    }
    if (j.contains("weights")) {
      allow_keys(j.at("weights"), {"local", "global"}, "weights");
      read(j.at("weights"), "local", c.weight_local);
      read(j.at("weights"), "global", c.weight_global);
    }
    if (j.contains("reward")) {
      const auto& r = j.at("reward");
      allow_keys(r, {"alpha", "step_penalty", "perfect_bonus"}, "reward");
      read(r, "alpha", c.reward.alpha);
      read(r, "step_penalty", c.reward.step_penalty_b);
      read(r, "perfect_bonus", c.reward.perfect_bonus);
    }
    read(j, "solvers", c.solvers);
    read(j, "evaluation_budget", c.evaluation_budget);
    if (j.contains("train")) {
      const auto& t = j.at("train");
      allow_keys(t,
                 {"iterations", "max_swaps", "gamma", "clip_epsilon", "soft_update_beta", "prior_start", "prior_end",
                  "buffer_capacity", "batch_size", "update_epochs", "actor_learning_rate", "critic_learning_rate",
                  "grad_clip", "hidden", "critic_hidden", "critic_summary", "value_scale", "stagnation_patience", "escape_burst", "tabu_states", "reshuffle", "bootstrap_truncated"},
                 "train");
      auto& tc = c.train;
      read(t, "iterations", tc.iterations);
      read(t, "max_swaps", tc.max_swaps);
      read(t, "gamma", tc.gamma);
      read(t, "clip_epsilon", tc.clip_epsilon);
      read(t, "soft_update_beta", tc.soft_update_beta);
      if (t.contains("prior_start")) tc.prior_start = read_prior(t.at("prior_start"));
      if (t.contains("prior_end")) tc.prior_end = read_prior(t.at("prior_end"));
      read(t, "buffer_capacity", tc.buffer_capacity);
      read(t, "batch_size", tc.batch_size);
      read(t, "update_epochs", tc.update_epochs);
      read(t, "actor_learning_rate", tc.actor_learning_rate);
      read(t, "critic_learning_rate", tc.critic_learning_rate);
      read(t, "grad_clip", tc.grad_clip);
      read(t, "hidden", tc.hidden);
      read(t, "critic_hidden", tc.critic_hidden);
      read(t, "critic_summary", tc.critic_summary);
      read(t, "value_scale", tc.value_scale);
      read(t, "stagnation_patience", tc.stagnation_patience);
      read(t, "escape_burst", tc.escape_burst);
      read(t, "tabu_states", tc.tabu_states);
      read(t, "reshuffle", tc.reshuffle);
      read(t, "bootstrap_truncated", tc.bootstrap_truncated);
    }
    if (j.contains("evo")) {
      const auto& e = j.at("evo");
      allow_keys(e,
                 {"iterations", "population", "crossover_rate", "mutation_rate", "elite", "tournament",
                  "actor_samples", "history_actions", "rollout_depth"},
                 "evo");
      read(e, "iterations", c.evo.iterations);
      read(e, "population", c.evo.population);
      read(e, "crossover_rate", c.evo.crossover_rate);
      read(e, "mutation_rate", c.evo.mutation_rate);
      read(e, "elite", c.evo.elite);
      read(e, "tournament", c.evo.tournament);
      read(e, "actor_samples", c.evo.actor_samples);
      read(e, "history_actions", c.evo.history_actions);
      read(e, "rollout_depth", c.evo.rollout_depth);
    }
    if (j.contains("solve")) {
      allow_keys(j.at("solve"), {"max_swaps"}, "solve");
      read(j.at("solve"), "max_swaps", c.solve_max_swaps);
    }
    if (j.contains("greedy")) {
      allow_keys(j.at("greedy"), {"max_steps"}, "greedy");
      read(j.at("greedy"), "max_steps", c.greedy.max_steps);
    }
    if (j.contains("tabu")) {
      allow_keys(j.at("tabu"), {"tenure", "max_iterations"}, "tabu");
      read(j.at("tabu"), "tenure", c.tabu.tenure);
      read(j.at("tabu"), "max_iterations", c.tabu.max_iterations);
    }
    if (j.contains("ga")) {
      const auto& g = j.at("ga");
      allow_keys(g, {"population", "generations", "crossover_rate", "mutation_rate", "elite", "tournament"}, "ga");
      read(g, "population", c.ga.population);
      read(g, "generations", c.ga.generations);
      read(g, "crossover_rate", c.ga.crossover_rate);
      read(g, "mutation_rate", c.ga.mutation_rate);
      read(g, "elite", c.ga.elite);
      read(g, "tournament", c.ga.tournament);
    }
    read(j, "workers", c.workers);
    read(j, "emit_images", c.emit_images);
    read(j, "checkpoint_every", c.checkpoint_every);
    read(j, "resume", c.resume);
    if (j.contains("checkpoints")) {
      for (const auto& item : j.at("checkpoints").items()) {
        c.checkpoints[item.key()] = resolve(base, item.value().get<std::string>());
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }
  c.raw = j;
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j, path.parent_path());
}

void ExperimentConfig::set_seed(std::uint64_t seed) {
  seeds = {seed};
  raw["seeds"] = seeds;
}

void ExperimentConfig::set_output_dir(const fs::path& dir) {
  output_dir = dir;
  raw["output_dir"] = dir.string();
}

void ExperimentConfig::set_solvers(std::vector<std::string> s) {
  solvers = std::move(s);
  raw["solvers"] = solvers;
}

fs::path ExperimentConfig::checkpoint_path(const std::string& kind) const {
  auto it = checkpoints.find(kind);
  return it != checkpoints.end() ? it->second : output_dir / ("agent_" + kind + ".ckpt");
}

fs::path ExperimentConfig::train_log_path(const std::string& kind) const {
  return output_dir / ("train_" + kind + ".ndjson");
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seeds must be non-empty");
  if (output_dir.empty()) throw ConfigError("output_dir must be set");
  validate_source(instances, "instances");
  if (train_instances) validate_source(*train_instances, "train_instances");
  if (perception.kinds.empty()) throw ConfigError("perception.kinds must be non-empty");
  for (const auto& k : perception.kinds) {
    if (!kPerceptions.count(k)) throw ConfigError("unknown perception '" + k + "'");
  }
  if (!(perception.oracle_corruption >= 0.0 && perception.oracle_corruption < 0.5)) {
    throw ConfigError("perception.oracle.corruption must be in [0, 0.5)");
  }
  const auto& ps = perception.pixelstat;
  if (ps.strip_px < 1 || ps.bins < 1 || !(ps.temperature > 0.0) || !(ps.gradient_weight >= 0.0)) {
    throw ConfigError("perception.pixelstat parameters out of range");
  }
  if (!(weight_local >= 0.0 && weight_global >= 0.0) || weight_local + weight_global <= 0.0) {
    throw ConfigError("weights must be >= 0 with a positive entry");
  }
  if (solvers.empty()) throw ConfigError("solvers must be non-empty");
  for (const auto& s : solvers) {
    if (!kSolvers.count(s)) throw ConfigError("unknown solver '" + s + "'");
  }
  if (solve_max_swaps < 0) throw ConfigError("solve.max_swaps must be >= 0");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  try {
    reward.validate();
    train.validate();
    evo.validate();
    tabu.validate();
    ga.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
}

// ---------------------------------------------------------------------------

std::vector<PuzzleInstance> build_instances(const InstanceSource& source, std::span<const std::uint64_t> seeds,
                                            std::ostream& log) {
  std::vector<PuzzleInstance> out;
  char id[256];
  if (source.kind == "instances") {
    std::vector<fs::path> dirs;
    if (fs::is_directory(source.instance_dir)) {
      for (const auto& e : fs::directory_iterator(source.instance_dir)) {
        if (e.is_directory() && fs::exists(e.path() / "manifest.json")) dirs.push_back(e.path());
      }
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) out.push_back(load_instance(d).instance);
  } else if (source.kind == "synthetic") {
    for (std::size_t gi = 0; gi < source.geometries.size(); ++gi) {
      const auto& g = source.geometries[gi];
      const BoardShape shape{g.rows, g.cols};
      for (auto seed : seeds) {
        for (int i = 0; i < source.count; ++i) {
          const auto key = hash_combine(hash_combine(seed, gi), static_cast<std::uint64_t>(i));
          const Raster img = synthetic_image(required_extent(g.cols, g.fragment_px, g.gap_px),
                                             required_extent(g.rows, g.fragment_px, g.gap_px), key);
          std::snprintf(id, sizeof id, "syn%04d_%dx%d_g%d_s%llu", i, g.rows, g.cols, g.gap_px,
                        static_cast<unsigned long long>(seed));
          out.push_back(make_instance(img, id, shape, g.fragment_px, g.gap_px, hash_combine(key, 0x5bu)));
        }
      }
    }
  } else {
    std::vector<fs::path> files;
    if (fs::is_directory(source.image_dir)) {
      for (const auto& e : fs::directory_iterator(source.image_dir)) {
        if (e.is_regular_file() && is_supported_image(e.path())) files.push_back(e.path());
      }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no inputs: no PNG or PPM images in " + source.image_dir.string());
    int skipped = 0;
    for (std::size_t gi = 0; gi < source.geometries.size(); ++gi) {
      const auto& g = source.geometries[gi];
      for (auto seed : seeds) {
        for (std::size_t fi = 0; fi < files.size(); ++fi) {
          const std::string stem = files[fi].stem().string();
          std::snprintf(id, sizeof id, "%s_%dx%d_g%d_s%llu", stem.c_str(), g.rows, g.cols, g.gap_px,
                        static_cast<unsigned long long>(seed));
          try {
            const auto key = hash_combine(hash_combine(seed, gi), name_hash(stem));
            out.push_back(make_instance(read_image(files[fi]), id, {g.rows, g.cols}, g.fragment_px, g.gap_px, key));
          } catch (const std::exception& e) {
            ++skipped;
            log << "skip " << id << ": " << e.what() << '\n';
          }
        }
      }
    }
    if (skipped > 0) log << "skipped " << skipped << " of " << skipped + out.size() << " inputs\n";
  }
  if (out.empty()) throw DataError("no inputs: the instance source produced no puzzles");
  return out;
}

std::unique_ptr<PerceptionModel> make_perception(const PerceptionSettings& settings, const std::string& kind,
                                                 const PuzzleSpec& spec, std::uint64_t seed) {
  if (kind == "oracle") return oracle_model(spec, settings.oracle_corruption, seed);
  if (kind == "pixelstat") return pixelstat_model(spec, settings.pixelstat);
  throw ConfigError("unknown perception '" + kind + "'");
}

// ---------------------------------------------------------------------------

SummaryRow summarize(const std::string& perception, const std::string& solver, std::span<const InstanceResult> results) {
  SummaryRow row{perception, solver, static_cast<int>(results.size())};
  if (results.empty()) return row;
  double perfect = 0, absolute = 0, horizontal = 0, vertical = 0, evals = 0;
  for (const auto& r : results) {
    perfect += r.metrics.perfect ? 1.0 : 0.0;
    absolute += r.metrics.absolute_frac;
    horizontal += r.metrics.horizontal_frac;
    vertical += r.metrics.vertical_frac;
    evals += static_cast<double>(r.evaluations);
  }
  const double n = static_cast<double>(results.size());
  row.perfect = round_to(100.0 * perfect / n, 1e4);
  row.absolute = round_to(100.0 * absolute / n, 1e4);
  row.horizontal = round_to(100.0 * horizontal / n, 1e4);
  row.vertical = round_to(100.0 * vertical / n, 1e4);
  row.mean_evaluations = round_to(evals / n, 10.0);
  return row;
}

std::string BenchmarkTable::summary_csv() const {
  std::string s = "perception,solver,instances,Perf.,Abs.,Hori.,Vert.,mean_evaluations\n";
  for (const auto& r : rows) {
    s += r.perception + "," + r.solver + "," + std::to_string(r.instances) + "," + fixed(r.perfect, 4) + "," +
         fixed(r.absolute, 4) + "," + fixed(r.horizontal, 4) + "," + fixed(r.vertical, 4) + "," +
         fixed(r.mean_evaluations, 1) + "\n";
  }
  return s;
}

std::string BenchmarkTable::instances_csv() const {
  std::string s = "perception,solver,instance,perfect,absolute,horizontal,vertical,evaluations,steps\n";
  for (const auto& r : instances) {
    s += r.perception + "," + r.solver + "," + r.instance + "," + (r.metrics.perfect ? "1" : "0") + "," +
         fixed(r.metrics.absolute_frac, 6) + "," + fixed(r.metrics.horizontal_frac, 6) + "," +
         fixed(r.metrics.vertical_frac, 6) + "," + std::to_string(r.evaluations) + "," + std::to_string(r.steps) + "\n";
  }
  return s;
}

json BenchmarkTable::to_json() const {
  json j;
  j["summary"] = json::array();
  for (const auto& r : rows) {
    j["summary"].push_back({{"perception", r.perception},
                            {"solver", r.solver},
                            {"instances", r.instances},
                            {"perfect", r.perfect},
                            {"absolute", r.absolute},
                            {"horizontal", r.horizontal},
                            {"vertical", r.vertical},
                            {"mean_evaluations", r.mean_evaluations}});
  }
  j["instances"] = json::array();
  for (const auto& r : instances) {
    j["instances"].push_back({{"perception", r.perception},
                              {"solver", r.solver},
                              {"instance", r.instance},
                              {"perfect", r.metrics.perfect},
                              {"absolute", round_to(r.metrics.absolute_frac, 1e6)},
                              {"horizontal", round_to(r.metrics.horizontal_frac, 1e6)},
                              {"vertical", round_to(r.metrics.vertical_frac, 1e6)},
                              {"evaluations", r.evaluations},
                              {"steps", r.steps}});
  }
  return j;
}

std::string BenchmarkTable::pretty() const {
  std::string s;
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %-7s %5s %9s %9s %9s %9s %14s\n", "perception", "solver", "n", "Perf.",
                "Abs.", "Hori.", "Vert.", "evaluations");
  s += line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-10s %-7s %5d %9.2f %9.2f %9.2f %9.2f %14.1f\n", r.perception.c_str(),
                  r.solver.c_str(), r.instances, r.perfect, r.absolute, r.horizontal, r.vertical, r.mean_evaluations);
    s += line;
  }
  return s;
}

// ---------------------------------------------------------------------------

namespace {

EvidenceWeights weights_for(const ExperimentConfig& c, BoardShape shape) {
  return EvidenceWeights::uniform(shape, c.weight_local, c.weight_global);
}

void prepare_output(const ExperimentConfig& c) {
  fs::create_directories(c.output_dir);
  write_text(c.output_dir / "config.json", c.raw.dump(2) + "\n");
}

Raster side_by_side(const PuzzleSpec& spec, const Permutation& before, const Permutation& after) {
  const Raster a = render_assembly(spec, before.placement());
  const Raster b = render_assembly(spec, after.placement());
  const Raster t = render_assembly(spec, Permutation::identity(spec.shape().cells()).placement());
  const int pad = std::max(4, spec.fragment_px() / 4);
  Raster canvas(3 * a.width + 2 * pad, a.height, 255);
  blit(canvas, a, 0, 0);
  blit(canvas, b, a.width + pad, 0);
  blit(canvas, t, 2 * (a.width + pad), 0);
  return canvas;
}

json action_json(const Action& a) {
  json j{{"kind", std::string(to_string(a.kind))}, {"pos", json::array()}};
  for (int i = 0; i < a.arity(); ++i) j["pos"].push_back(a.pos[i]);
  if (a.kind == ActionKind::Swap3) j["forward"] = a.forward;
  return j;
}

BenchmarkTable run_pairs(const ExperimentConfig& c, const std::vector<std::string>& kinds,
                         const std::vector<std::string>& solvers, bool write_solutions, std::ostream& log) {
  const auto instances = build_instances(c.instances, c.seeds, log);
  const std::uint64_t base = c.seeds.front();
  BenchmarkTable table;
  if (c.emit_images) fs::create_directories(c.output_dir / "images");
  if (write_solutions) fs::create_directories(c.output_dir / "solutions");

  for (const auto& kind : kinds) {
    std::optional<Agent> agent;
    if (std::find(solvers.begin(), solvers.end(), "evorl") != solvers.end()) {
      const auto path = c.checkpoint_path(kind);
      if (!fs::exists(path)) throw DataError("missing checkpoint for evorl with " + kind + " perception: " + path.string());
      agent = Agent::load(path);
    }
    for (const auto& solver : solvers) {
      std::vector<InstanceResult> results(instances.size());
      std::vector<SolveResult> solutions(instances.size());
      parallel_for(instances.size(), c.workers, [&](std::size_t i) {
        const auto& inst = instances[i];
        const auto model = make_perception(c.perception, kind, inst.spec, hash_combine(hash_combine(base, 0x7e57), i));
        const auto weights = weights_for(c, inst.spec.shape());
        const std::uint64_t seed = hash_combine(hash_combine(base, 0x501e), i);
        SolveResult r;
        if (solver == "evorl") {
          if (agent->shape != inst.spec.shape()) throw ConfigError("checkpoint board does not match " + inst.id);
          r = solve(*agent, inst.spec, inst.initial, *model, weights, c.train, c.evo, c.reward,
                    SolveOptions{c.solve_max_swaps, c.evaluation_budget, seed});
        } else if (solver == "greedy") {
          GreedyConfig g = c.greedy;
          g.max_evaluations = c.evaluation_budget;
          r = greedy_solve(inst.spec, inst.initial, *model, weights, g);
        } else if (solver == "tabu") {
          TabuConfig t = c.tabu;
          t.seed = seed;
          t.max_evaluations = c.evaluation_budget;
          r = tabu_solve(inst.spec, inst.initial, *model, weights, t);
        } else {
          GaConfig g = c.ga;
          g.seed = seed;
          g.max_evaluations = c.evaluation_budget;
          r = ga_solve(inst.spec, inst.initial, *model, weights, g);
        }
        results[i] = InstanceResult{kind, solver, inst.id, r.metrics, r.evaluations, r.steps};
        solutions[i] = std::move(r);
      });
      for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto& inst = instances[i];
        const std::string stem = kind + "_" + solver + "_" + inst.id;
        if (c.emit_images) {
          write_png(c.output_dir / "images" / (stem + ".png"), side_by_side(inst.spec, inst.initial, solutions[i].final_state));
        }
        if (write_solutions) {
          json s{{"instance", inst.id}, {"perception", kind}, {"solver", solver}};
          s["initial_placement"] = inst.initial.values();
          s["final_placement"] = solutions[i].final_state.values();
          s["actions"] = json::array();
          for (const auto& a : solutions[i].actions) s["actions"].push_back(action_json(a));
          s["perfect"] = solutions[i].metrics.perfect;
          s["absolute"] = solutions[i].metrics.absolute_frac;
          s["horizontal"] = solutions[i].metrics.horizontal_frac;
          s["vertical"] = solutions[i].metrics.vertical_frac;
          s["evaluations"] = solutions[i].evaluations;
          s["steps"] = solutions[i].steps;
          write_text(c.output_dir / "solutions" / (stem + ".json"), s.dump(2) + "\n");
        }
      }
      table.rows.push_back(summarize(kind, solver, results));
      table.instances.insert(table.instances.end(), results.begin(), results.end());
      log << kind << "/" << solver << ": Perf. " << fixed(table.rows.back().perfect, 2) << "% over "
          << instances.size() << " instances\n";
    }
  }
  write_text(c.output_dir / "results.csv", table.summary_csv());
  write_text(c.output_dir / "instances.csv", table.instances_csv());
  write_text(c.output_dir / "results.json", table.to_json().dump(2) + "\n");
  return table;
}

}  // namespace

std::vector<fs::path> cmd_generate(const ExperimentConfig& c, std::ostream& log) {
  c.validate();
  if (c.instances.kind == "instances") throw ConfigError("generate needs a synthetic or images source");
  prepare_output(c);
  const auto instances = build_instances(c.instances, c.seeds, log);
  std::vector<fs::path> dirs;
  for (const auto& inst : instances) {
    const fs::path dir = c.output_dir / "instances" / inst.id;
    fs::remove_all(dir);
    const std::string image_id = inst.id.substr(0, inst.id.find('_'));
    // The shuffle seed is not recoverable from the instance itself; record
    // the hash of the initial placement instead so reruns can be compared.
    std::uint64_t h = 0;
    for (int v : inst.initial.values()) h = hash_combine(h, static_cast<std::uint64_t>(v));
    save_instance(dir, inst, image_id, h);
    dirs.push_back(dir);
  }
  log << "generated " << dirs.size() << " instances in " << (c.output_dir / "instances").string() << '\n';
  return dirs;
}

void cmd_train(const ExperimentConfig& c, std::ostream& log) {
  c.validate();
  prepare_output(c);
  const InstanceSource& source = c.train_instances ? *c.train_instances : c.instances;
  const auto seeds = c.train_instances ? c.seeds : train_seeds(c.seeds);
  const auto instances = build_instances(source, seeds, log);
  const BoardShape shape = instances.front().spec.shape();
  for (const auto& inst : instances) {
    if (inst.spec.shape() != shape) throw ConfigError("training puzzles must share one board shape");
  }

  for (const auto& kind : c.perception.kinds) {
    const auto ckpt = c.checkpoint_path(kind);
    const auto log_path = c.train_log_path(kind);
    const std::uint64_t agent_seed = hash_combine(c.seeds.front(), name_hash(kind));
    Agent agent = c.resume && fs::exists(ckpt) ? Agent::load(ckpt) : Agent::create(shape, c.train, agent_seed);
    if (agent.shape != shape) throw ConfigError("checkpoint " + ckpt.string() + " was trained on another board");

    // Keep only the log lines that the checkpoint already covers.
    std::vector<std::string> kept;
    if (c.resume && fs::exists(log_path)) {
      std::ifstream in(log_path);
      for (std::string line; std::getline(in, line);) {
        if (!line.empty() && json::parse(line).at("episode").get<int>() < agent.iterations_done) kept.push_back(line);
      }
    }
    std::ofstream out(log_path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + log_path.string());
    for (const auto& line : kept) out << line << '\n';

    TrainRun run;
    run.on_episode = [&](const EpisodeLog& e) {
      out << e.to_json().dump() << '\n';
      out.flush();
      if (c.checkpoint_every > 0 && agent.iterations_done % c.checkpoint_every == 0) agent.save(ckpt);
    };
    const PerceptionFactory factory = [&](const PuzzleSpec& spec, std::uint64_t seed) {
      return make_perception(c.perception, kind, spec, seed);
    };
    const int before = agent.iterations_done;
    train(agent, instances, factory, weights_for(c, shape), c.train, c.evo, c.reward, run);
    agent.save(ckpt);
    log << "trained " << kind << " agent: iterations " << before << " -> " << agent.iterations_done << ", checkpoint "
        << ckpt.string() << '\n';
  }
}

BenchmarkTable cmd_benchmark(const ExperimentConfig& c, std::ostream& log) {
  c.validate();
  prepare_output(c);
  auto table = run_pairs(c, c.perception.kinds, c.solvers, false, log);
  log << table.pretty();
  return table;
}

BenchmarkTable cmd_solve(const ExperimentConfig& c, std::ostream& log) {
  c.validate();
  prepare_output(c);
  auto table = run_pairs(c, {c.perception.kinds.front()}, {c.solvers.front()}, true, log);
  log << table.pretty();
  return table;
}

}  // namespace jigsaw
