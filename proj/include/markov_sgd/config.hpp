#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

#include "markov_sgd/chain.hpp"
#include "markov_sgd/engine.hpp"
#include "markov_sgd/objectives.hpp"
#include "markov_sgd/schedule.hpp"

namespace markov_sgd {

using Json = nlohmann::json;

/// Parses a JSON file. IoError when unreadable, ConfigError when malformed.
Json load_json_file(const std::string& path);

/// Sets a dotted path such as "schedule.alpha0". The value is parsed as JSON
/// when possible and kept as a string otherwise.
void apply_override(Json& config, std::string_view dotted_key, std::string_view value);

MarkovChain chain_from_json(const Json& section);

/// Either explicit per-state data ("A"/"b", "A"/"b"/"row_state", "a"/"terms")
/// or a seeded random family ("dim", "seed", and family options).
SampledObjective objective_from_json(const Json& section, const Vector& mu);

/// RegimeMismatch when the section's regime differs from the objective's.
StepSchedule schedule_from_json(const Json& section, const SampledObjective& objective, const MarkovChain& chain);

RunConfig run_config_from_json(const Json& section);

/// A fully built experiment: every section validated and instantiated.
struct Experiment {
  Json config;
  MarkovChain chain;
  SampledObjective objective;
  StepSchedule schedule;
  RunConfig run;
  std::size_t n_seeds = 1;
  bool dump_iterates = false;
  std::string output_dir;
};

Experiment build_experiment(const Json& config);

/// FNV-1a of the canonical (sorted-key) serialisation.
std::uint64_t config_digest(const Json& config);

}  // namespace markov_sgd
