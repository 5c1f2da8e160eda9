// markov-sgd: config-driven driver for SGD under Markov sampling.
//
//   markov-sgd validate --config exp.json
//   markov-sgd run      --config exp.json --seeds 100 --out results/
//   markov-sgd compare  --config exp.json --seeds 100
//   markov-sgd report   --config exp.json --out results/

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "markov_sgd/error.hpp"
#include "markov_sgd/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"SGD with Markovian gradient samples"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::size_t> seeds;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::string> out;
  std::optional<std::string> kstar_mode;
  std::vector<std::string> sets;

  auto add_common = [&](CLI::App* cmd, bool runs) {
    cmd->add_option("--config", config_path, "experiment JSON")->required()->check(CLI::ExistingFile);
    cmd->add_option("--set", sets, "override KEY=VALUE by dotted path (repeatable)");
    cmd->add_option("--kstar-mode", kstar_mode, "conservative | paper_literal")
        ->check(CLI::IsMember({"conservative", "paper_literal"}));
    cmd->add_option("--out", out, "output directory");
    if (runs) {
      cmd->add_option("--seeds", seeds, "ensemble size")->check(CLI::PositiveNumber);
      cmd->add_option("--seed", seed, "base seed");
      cmd->add_option("--mode", mode, "markov | iid")->check(CLI::IsMember({"markov", "iid"}));
    }
  };

  auto* validate = app.add_subcommand("validate", "check a config and print its constants");
  auto* run = app.add_subcommand("run", "run an ensemble and write trajectories and reports");
  auto* compare = app.add_subcommand("compare", "run Markov and IID sampling with paired seeds");
  auto* report = app.add_subcommand("report", "re-analyse trajectories already written by run");
  add_common(validate, false);
  add_common(run, true);
  add_common(compare, true);
  add_common(report, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  markov_sgd::Json config;
  try {
    markov_sgd::CommandOptions options;
    options.seeds = seeds;
    options.seed = seed;
    options.mode = mode;
    options.out = out;
    options.kstar_mode = kstar_mode;
    options.sets = sets;
    config = markov_sgd::resolve_config(markov_sgd::load_json_file(config_path), options);
  } catch (const markov_sgd::Error& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }

  if (*validate) return markov_sgd::cmd_validate(config, std::cout, std::cerr);
  if (*run) return markov_sgd::cmd_run(config, std::cout, std::cerr);
  if (*compare) return markov_sgd::cmd_compare(config, std::cout, std::cerr);
  return markov_sgd::cmd_report(config, std::cout, std::cerr);
}
