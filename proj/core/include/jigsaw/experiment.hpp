#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "jigsaw/agent.hpp"
#include "jigsaw/baselines.hpp"
#include "jigsaw/dataset.hpp"
#include "jigsaw/evolution.hpp"
#include "jigsaw/perception.hpp"

namespace jigsaw {

struct GeometrySpec {
  int rows = 4;
  int cols = 4;
  /// <= 0: largest that fits the source image.
  int fragment_px = 16;
  int gap_px = 2;
};

/// Where puzzles come from.
///  - "synthetic": `count` procedural images per (geometry, seed)
///  - "images":    every PNG/PPM in `image_dir`, once per (geometry, seed)
///  - "instances": every instance directory under `instance_dir`
struct InstanceSource {
  std::string kind = "synthetic";
  std::filesystem::path image_dir;
  std::filesystem::path instance_dir;
  int count = 10;
  std::vector<GeometrySpec> geometries{GeometrySpec{}};
};

struct PerceptionSettings {
  std::vector<std::string> kinds{"oracle"};
  double oracle_corruption = 0.0;
  PixelStatParams pixelstat;
};

/// Everything one run needs. Loaded from a single JSON file; see
/// docs/config.md for the schema.
struct ExperimentConfig {
  std::vector<std::uint64_t> seeds{1};
  std::filesystem::path output_dir = "out";
  InstanceSource instances;
  /// Defaults to `instances` with seeds offset so train and test differ.
  std::optional<InstanceSource> train_instances;
  PerceptionSettings perception;
  double weight_local = 1.0;
  double weight_global = 1.0;
  RewardParams reward;
  std::vector<std::string> solvers{"evorl"};
  /// Evidence evaluations granted to every solver per instance (0: none).
  std::uint64_t evaluation_budget = 0;
  TrainConfig train;
  EvoConfig evo;
  int solve_max_swaps = 500;
  GreedyConfig greedy;
  TabuConfig tabu;
  GaConfig ga;
  int workers = 1;
  bool emit_images = false;
  /// Write a checkpoint every this many training iterations (0: only at the end).
  int checkpoint_every = 0;
  bool resume = false;
  /// Per-perception checkpoint paths; default <output_dir>/agent_<kind>.ckpt.
  std::map<std::string, std::filesystem::path> checkpoints;
  /// The effective configuration, copied into the output directory.
  nlohmann::json raw;

  /// Relative paths resolve against `base_dir`. Throws ConfigError.
  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);

  void set_seed(std::uint64_t seed);
  void set_output_dir(const std::filesystem::path& dir);
  void set_solvers(std::vector<std::string> solvers);

  std::filesystem::path checkpoint_path(const std::string& perception) const;
  std::filesystem::path train_log_path(const std::string& perception) const;

  /// Throws ConfigError.
  void validate() const;
};

/// Materialises a source. Per-image failures are reported to `log` and
/// skipped; an empty result throws DataError("no inputs").
std::vector<PuzzleInstance> build_instances(const InstanceSource& source, std::span<const std::uint64_t> seeds,
                                            std::ostream& log);

std::unique_ptr<PerceptionModel> make_perception(const PerceptionSettings& settings, const std::string& kind,
                                                 const PuzzleSpec& spec, std::uint64_t seed);

struct InstanceResult {
  std::string perception;
  std::string solver;
  std::string instance;
  MetricsReport metrics;
  std::uint64_t evaluations = 0;
  int steps = 0;
};

/// Percentages rounded to 4 decimals, identical in CSV and JSON.
struct SummaryRow {
  std::string perception;
  std::string solver;
  int instances = 0;
  double perfect = 0.0;
  double absolute = 0.0;
  double horizontal = 0.0;
  double vertical = 0.0;
  double mean_evaluations = 0.0;
};

struct BenchmarkTable {
  std::vector<SummaryRow> rows;
  std::vector<InstanceResult> instances;

  std::string summary_csv() const;
  std::string instances_csv() const;
  nlohmann::json to_json() const;
  /// Plain-text table with Perf./Abs./Hori./Vert. columns.
  std::string pretty() const;
};

SummaryRow summarize(const std::string& perception, const std::string& solver,
                     std::span<const InstanceResult> results);

/// Writes one instance directory per generated puzzle under
/// <output_dir>/instances and returns their paths.
std::vector<std::filesystem::path> cmd_generate(const ExperimentConfig& config, std::ostream& log);

/// Trains one agent per perception kind; writes agent_<kind>.ckpt and
/// train_<kind>.ndjson into the output directory.
void cmd_train(const ExperimentConfig& config, std::ostream& log);

/// Runs every perception × solver pair over the instances; writes
/// results.csv, instances.csv, results.json and config.json.
BenchmarkTable cmd_benchmark(const ExperimentConfig& config, std::ostream& log);

/// Solves with the first perception and first solver, writing one JSON
/// solution (and image, if enabled) per instance plus the tables.
BenchmarkTable cmd_solve(const ExperimentConfig& config, std::ostream& log);

/// Process exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitData = 3, kExitRuntime = 4 };

}  // namespace jigsaw
