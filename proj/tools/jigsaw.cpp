// jigsaw: generate, train, solve and benchmark gap-jigsaw reassembly.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "jigsaw/error.hpp"
#include "jigsaw/experiment.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> solvers;
  bool resume = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Replace the config's seed list with this seed");
  cmd->add_option("--out", o.out, "Output directory");
}

jigsaw::ExperimentConfig load(const Overrides& o) {
  auto c = jigsaw::ExperimentConfig::load(o.config);
  if (o.seed) c.set_seed(*o.seed);
  if (o.out) c.set_output_dir(*o.out);
  if (!o.solvers.empty()) c.set_solvers(o.solvers);
  if (o.resume) {
    c.resume = true;
    c.raw["resume"] = true;
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reassemble jigsaw puzzles with eroded gaps"};
  app.require_subcommand(1);
  Overrides o;

  auto* gen = app.add_subcommand("generate", "Write puzzle instance directories");
  add_common(gen, o);
  auto* tr = app.add_subcommand("train", "Train one agent per perception model");
  add_common(tr, o);
  tr->add_flag("--resume", o.resume, "Continue from the existing checkpoint");
  auto* sv = app.add_subcommand("solve", "Solve instances and write solutions");
  add_common(sv, o);
  sv->add_option("--solver", o.solvers, "evorl, greedy, tabu or ga");
  auto* bm = app.add_subcommand("benchmark", "Run every perception x solver pair");
  add_common(bm, o);
  bm->add_option("--solver", o.solvers, "Restrict to these solvers");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? jigsaw::kExitOk : jigsaw::kExitConfig;
  }

  try {
    const auto config = load(o);
    if (gen->parsed()) {
      jigsaw::cmd_generate(config, std::cout);
    } else if (tr->parsed()) {
      jigsaw::cmd_train(config, std::cout);
    } else if (sv->parsed()) {
      jigsaw::cmd_solve(config, std::cout);
    } else {
      jigsaw::cmd_benchmark(config, std::cout);
    }
  } catch (const jigsaw::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return jigsaw::kExitConfig;
  } catch (const jigsaw::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return jigsaw::kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return jigsaw::kExitRuntime;
  }
  return jigsaw::kExitOk;
}
