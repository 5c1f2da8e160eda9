#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "markov_sgd/analysis.hpp"
#include "markov_sgd/config.hpp"
#include "markov_sgd/verify.hpp"

namespace markov_sgd {

/// Long-format CSV with header `k,seed,dist_sq,f_gap,grad_sq,x_norm`.
/// Unavailable values are left empty.
std::string trajectories_csv(const std::vector<Trajectory>& trajectories);

/// `seed,R,dist_sq,f_gap,grad_sq,x_norm` for the randomized stopping index.
std::string stops_csv(const std::vector<Trajectory>& trajectories);

/// `metric,k,mean,half_width` for every available metric.
std::string mean_curves_csv(const std::vector<Trajectory>& trajectories);

/// One JSON object per iterate: {"seed", "k", "xi", "x"}.
std::string iterates_jsonl(const std::vector<Trajectory>& trajectories);

/// Rebuilds record-only trajectories from the two CSV files written by `run`.
std::vector<Trajectory> trajectories_from_csv(const std::string& trajectories, const std::string& stops);

Json to_json(const BoundReport& report);
Json to_json(const RateFit& fit);
Json to_json(const SamplingComparison& comparison);

/// Rate fit over [max(K*, 100), horizon] on the regime's headline metric
/// (dist_sq for StronglyConvex/ErrorBound, grad_sq for Nonconvex).
/// Returns nullopt with `why` set when no fit is possible.
std::optional<RateFit> headline_fit(const Experiment& experiment, const std::vector<Trajectory>& trajectories,
                                    std::string* why = nullptr);

/// Numbers are written with 17 significant digits so outputs are byte-stable.
std::string format_number(double value);

struct CommandOptions {
  std::optional<std::size_t> seeds;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::string> out;
  std::optional<std::string> kstar_mode;
  std::vector<std::string> sets;  ///< KEY=VALUE
};

/// Applies flag overrides to a loaded config document.
Json resolve_config(Json config, const CommandOptions& options);

/// Exit codes: 0 success, 1 validation failure, 2 runtime failure.
int cmd_validate(const Json& config, std::ostream& out, std::ostream& err);
int cmd_run(const Json& config, std::ostream& out, std::ostream& err);
int cmd_compare(const Json& config, std::ostream& out, std::ostream& err);
int cmd_report(const Json& config, std::ostream& out, std::ostream& err);

}  // namespace markov_sgd
