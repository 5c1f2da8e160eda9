#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "markov_sgd/chain.hpp"
#include "markov_sgd/objectives.hpp"
#include "markov_sgd/schedule.hpp"

namespace markov_sgd {

enum class Sampling { Markov, IID };

std::string_view to_string(Sampling sampling) noexcept;
Sampling parse_sampling(std::string_view name);

/// Iterates are numbered from 1: x_1 = x0, and x_{k+1} = x_k - alpha_k G(x_k; xi_k)
/// for k = 1..horizon-1. The chain starts at xi_1 = xi0.
struct RunConfig {
  std::optional<Vector> x0;  ///< default_x0() when absent
  State xi0 = 0;
  std::size_t horizon = 1;
  Sampling sampling = Sampling::Markov;
  std::uint64_t seed = 0;
  std::size_t record_every = 1;
  bool record_full = false;  ///< keep every iterate and state (descent audit)
};

/// Diagnostics at one iterate. NaN marks a quantity the objective cannot provide.
struct Record {
  std::size_t k = 0;
  State xi = 0;
  Vector x;
  double dist_sq = 0.0;  ///< ||x_k - proj_{X*}(x_k)||^2
  double f_gap = 0.0;    ///< f(x_k) - f*
  double grad_sq = 0.0;  ///< ||grad f(x_k)||^2
  double x_norm = 0.0;
};

struct Trajectory {
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::vector<Record> records;
  std::vector<Vector> iterates;  ///< x_1..x_n when record_full
  StateSequence states;          ///< xi_1..xi_n when record_full
  bool diverged = false;
  std::size_t diverged_at = 0;
  std::size_t step_bound_violations = 0;
  std::optional<Record> stop;    ///< x_R under the randomized stopping rule (Nonconvex)
  std::string error;             ///< non-empty when this seed failed inside an ensemble

  /// FNV-1a over every recorded number; equal hashes mean identical runs.
  std::uint64_t hash() const;
  const Record* find(std::size_t k) const;
};

/// Checkpoints: every record_every-th k up to 10^3, then 100 per decade,
/// always including `extra` points and the horizon.
std::vector<std::size_t> checkpoint_grid(std::size_t horizon, std::size_t record_every,
                                         const std::vector<std::size_t>& extra = {});

/// Deterministic start at distance 10 from X* along a seeded direction
/// orthogonal to X*; at norm 10 when X* is unavailable.
Vector default_x0(const SampledObjective& objective, std::uint64_t seed);

Record diagnose(const SampledObjective& objective, std::size_t k, State xi, const Vector& x);

std::uint64_t run_config_hash(const RunConfig& config, const StepSchedule& schedule);

/// DivergenceDetected conditions truncate the run and set `diverged`.
Trajectory run(const MarkovChain& chain, const SampledObjective& objective, const StepSchedule& schedule,
               const RunConfig& config);

/// Seeds config.seed + i, i < n_seeds, returned in seed order. x0 is resolved
/// once from config.seed so every seed starts at the same point. Threads are
/// capped by MARKOV_SGD_THREADS.
std::vector<Trajectory> run_ensemble(const MarkovChain& chain, const SampledObjective& objective,
                                     const StepSchedule& schedule, const RunConfig& config, std::size_t n_seeds);

/// R drawn from the stopping distribution, in [K*, T].
std::size_t draw_stop_index(const StepSchedule& schedule, std::uint64_t seed);

inline constexpr double kDivergenceNorm = 1e12;

}  // namespace markov_sgd
