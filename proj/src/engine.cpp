#include "markov_sgd/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <string>
#include <thread>

#include "markov_sgd/error.hpp"
#include "markov_sgd/rng.hpp"

namespace markov_sgd {

std::string_view to_string(Sampling sampling) noexcept {
  return sampling == Sampling::Markov ? "markov" : "iid";
}

Sampling parse_sampling(std::string_view name) {
  if (name == "markov") return Sampling::Markov;
  if (name == "iid") return Sampling::IID;
  throw Error(ErrorCode::ConfigError, "unknown sampling mode '" + std::string(name) + "'");
}

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

struct Fnv {
  std::uint64_t state = kFnvOffset;
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state ^= p[i];
      state *= kFnvPrime;
    }
  }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u64(bits);
  }
  void vec(const Vector& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
  }
};

void hash_record(Fnv& h, const Record& r) {
  h.u64(r.k);
  h.u64(r.xi);
  h.vec(r.x);
  h.f64(r.dist_sq);
  h.f64(r.f_gap);
  h.f64(r.grad_sq);
  h.f64(r.x_norm);
}

std::size_t thread_cap() {
  std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MARKOV_SGD_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && v > 0) cap = v;
  }
  return cap;
}

}  // namespace

std::uint64_t Trajectory::hash() const {
  Fnv h;
  h.u64(seed);
  h.u64(config_hash);
  h.u64(records.size());
  for (const auto& r : records) hash_record(h, r);
  h.u64(iterates.size());
  for (const auto& x : iterates) h.vec(x);
  for (State s : states) h.u64(s);
  h.u64(diverged ? 1 : 0);
  h.u64(diverged_at);
  h.u64(step_bound_violations);
  if (stop) hash_record(h, *stop);
  return h.state;
}

const Record* Trajectory::find(std::size_t k) const {
  auto it = std::lower_bound(records.begin(), records.end(), k,
                             [](const Record& r, std::size_t key) { return r.k < key; });
  return (it != records.end() && it->k == k) ? &*it : nullptr;
}

std::vector<std::size_t> checkpoint_grid(std::size_t horizon, std::size_t record_every,
                                         const std::vector<std::size_t>& extra) {
  if (record_every < 1) throw Error(ErrorCode::InvalidArgument, "record_every must be >= 1");
  std::vector<std::size_t> grid;
  const std::size_t dense = std::min<std::size_t>(horizon, 1000);
  for (std::size_t k = 1; k <= dense; k += record_every) grid.push_back(k);
  for (int j = 1;; ++j) {
    const auto k = static_cast<std::size_t>(std::llround(1000.0 * std::pow(10.0, j / 100.0)));
    if (k > horizon) break;
    grid.push_back(k);
  }
  for (std::size_t k : extra) {
    if (k >= 1 && k <= horizon) grid.push_back(k);
  }
  if (horizon >= 1) grid.push_back(horizon);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

Vector default_x0(const SampledObjective& objective, std::uint64_t seed) {
  const auto d = static_cast<Eigen::Index>(objective.dim());
  auto rng = Rng::stream(seed, "engine/x0");
  const bool has_opt = objective.opt_set_kind() != OptSetKind::Unavailable;
  const Vector base = has_opt ? objective.project_opt(Vector::Zero(d)) : Vector::Zero(d);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Vector dir(d);
    for (Eigen::Index i = 0; i < d; ++i) dir[i] = rng.normal();
    if (has_opt) {
      const Vector y = base + dir;
      dir = y - objective.project_opt(y);
    }
    if (dir.norm() > 1e-6) return base + 10.0 * dir.normalized();
  }
  throw Error(ErrorCode::InvalidArgument, "could not draw a start direction");
}

Record diagnose(const SampledObjective& objective, std::size_t k, State xi, const Vector& x) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  Record r;
  r.k = k;
  r.xi = xi;
  r.x = x;
  r.x_norm = x.norm();
  r.grad_sq = objective.mean_gradient(x).squaredNorm();
  r.dist_sq = objective.opt_set_kind() == OptSetKind::Unavailable ? nan : (x - objective.project_opt(x)).squaredNorm();
  r.f_gap = objective.f_star() ? objective.f_value(x) - *objective.f_star() : nan;
  return r;
}

std::uint64_t run_config_hash(const RunConfig& config, const StepSchedule& schedule) {
  Fnv h;
  if (config.x0) h.vec(*config.x0);
  h.u64(config.xi0);
  h.u64(config.horizon);
  h.u64(config.sampling == Sampling::Markov ? 0 : 1);
  h.u64(config.record_every);
  h.u64(config.record_full ? 1 : 0);
  h.u64(static_cast<std::uint64_t>(schedule.regime()));
  h.u64(static_cast<std::uint64_t>(schedule.kstar_mode()));
  h.f64(schedule.alpha0());
  h.f64(schedule.mixing_constant());
  h.u64(schedule.horizon());
  return h.state;
}

std::size_t draw_stop_index(const StepSchedule& schedule, std::uint64_t seed) {
  const auto probs = schedule.stopping_distribution();
  std::vector<double> cdf(probs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    cdf[i] = acc;
  }
  auto rng = Rng::stream(seed, "engine/stop");
  return schedule.kstar() + rng.categorical(cdf);
}

Trajectory run(const MarkovChain& chain, const SampledObjective& objective, const StepSchedule& schedule,
               const RunConfig& config) {
  if (chain.n_states() != objective.n_states()) {
    throw Error(ErrorCode::DimensionMismatch, "chain and objective disagree on the number of states");
  }
  if (schedule.regime() != objective.regime()) {
    throw Error(ErrorCode::RegimeMismatch, "schedule regime differs from the objective regime");
  }
  if (config.xi0 >= chain.n_states()) throw Error(ErrorCode::InvalidState, "xi0 out of range");
  if (config.horizon < 1) throw Error(ErrorCode::InvalidArgument, "horizon must be >= 1");
  if (schedule.regime() == Regime::Nonconvex && config.horizon > schedule.horizon()) {
    throw Error(ErrorCode::HorizonExceeded, "run horizon beyond the schedule's T");
  }
  Vector x = config.x0 ? *config.x0 : default_x0(objective, config.seed);
  if (static_cast<std::size_t>(x.size()) != objective.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "x0 has the wrong dimension");
  }
  if (!x.allFinite()) throw Error(ErrorCode::NonFiniteInput, "x0 is not finite");

  Trajectory traj;
  traj.seed = config.seed;
  RunConfig resolved = config;
  resolved.x0 = x;
  traj.config_hash = run_config_hash(resolved, schedule);

  std::optional<std::size_t> stop_index;
  if (schedule.regime() == Regime::Nonconvex && schedule.has_kstar() && schedule.kstar() <= schedule.horizon()) {
    stop_index = draw_stop_index(schedule, derive_seed(config.seed, "stop"));
  }
  std::vector<std::size_t> extra;
  if (schedule.has_kstar()) extra.push_back(schedule.kstar());
  const auto grid = checkpoint_grid(config.horizon, config.record_every, extra);
  std::size_t next_checkpoint = 0;

  auto rng = Rng::stream(config.seed, config.sampling == Sampling::Markov ? "engine/markov" : "engine/iid");
  const auto& cdf_rows = chain.row_cdf();
  const auto& mu_cdf = chain.stationary_cdf();
  const auto n = static_cast<std::size_t>(cdf_rows.cols());
  std::vector<std::vector<double>> row_cdf(n);
  for (std::size_t i = 0; i < n; ++i) {
    row_cdf[i].resize(n);
    for (std::size_t j = 0; j < n; ++j) row_cdf[i][j] = cdf_rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  State xi = config.sampling == Sampling::Markov ? config.xi0 : static_cast<State>(rng.categorical(mu_cdf));

  if (config.record_full) {
    traj.iterates.reserve(config.horizon);
    traj.states.reserve(config.horizon);
  }
  const double m = objective.growth_constant();
  Vector g(x.size());
  for (std::size_t k = 1; k <= config.horizon; ++k) {
    const double norm = x.norm();
    if (!x.allFinite() || norm > kDivergenceNorm) {
      traj.diverged = true;
      traj.diverged_at = k;
      break;
    }
    if (config.record_full) {
      traj.iterates.push_back(x);
      traj.states.push_back(xi);
    }
    if (next_checkpoint < grid.size() && grid[next_checkpoint] == k) {
      traj.records.push_back(diagnose(objective, k, xi, x));
      ++next_checkpoint;
    }
    if (stop_index && *stop_index == k) traj.stop = diagnose(objective, k, xi, x);
    if (k == config.horizon) break;

    objective.grad_sample_into(x, xi, g);
    if (g.norm() > m * (norm + 1.0) * (1.0 + 1e-9)) ++traj.step_bound_violations;
    x -= schedule.alpha(k) * g;
    xi = static_cast<State>(config.sampling == Sampling::Markov ? rng.categorical(row_cdf[xi])
                                                                 : rng.categorical(mu_cdf));
  }
  return traj;
}

std::vector<Trajectory> run_ensemble(const MarkovChain& chain, const SampledObjective& objective,
                                     const StepSchedule& schedule, const RunConfig& config, std::size_t n_seeds) {
  if (n_seeds < 1) throw Error(ErrorCode::InvalidArgument, "n_seeds must be >= 1");
  RunConfig base = config;
  if (!base.x0) base.x0 = default_x0(objective, config.seed);

  std::vector<Trajectory> out(n_seeds);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n_seeds; i = next++) {
      RunConfig cfg = base;
      cfg.seed = config.seed + i;
      try {
        out[i] = run(chain, objective, schedule, cfg);
      } catch (const std::exception& e) {
        out[i] = Trajectory{};
        out[i].seed = cfg.seed;
        out[i].error = e.what();
      }
    }
  };
  const std::size_t threads = std::min(thread_cap(), n_seeds);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return out;
}

}  // namespace markov_sgd
