#include "markov_sgd/chain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>

#include "markov_sgd/error.hpp"
#include "markov_sgd/rng.hpp"

namespace markov_sgd {

namespace {

constexpr double kRowSumTolerance = 1e-12;
constexpr std::size_t kRenormaliseEvery = 50;
constexpr std::size_t kMixingHorizon = 1'000'000;

void renormalise_rows(Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double s = m.row(i).sum();
    if (s > 0.0) m.row(i) /= s;
  }
}

// Breadth-first search over positive entries; returns BFS levels (or -1).
std::vector<long> bfs_levels(const Matrix& p, bool reverse) {
  const auto n = p.rows();
  std::vector<long> level(static_cast<std::size_t>(n), -1);
  std::queue<Eigen::Index> queue;
  level[0] = 0;
  queue.push(0);
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop();
    for (Eigen::Index v = 0; v < n; ++v) {
      const double w = reverse ? p(v, u) : p(u, v);
      if (w > 0.0 && level[static_cast<std::size_t>(v)] < 0) {
        level[static_cast<std::size_t>(v)] = level[static_cast<std::size_t>(u)] + 1;
        queue.push(v);
      }
    }
  }
  return level;
}

double second_eigenvalue_modulus(const Matrix& p) {
  if (p.rows() < 2) return 0.0;
  Eigen::EigenSolver<Matrix> solver(p, /*computeEigenvectors=*/false);
  std::vector<double> moduli;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    moduli.push_back(std::abs(solver.eigenvalues()[i]));
  }
  std::sort(moduli.begin(), moduli.end(), std::greater<>());
  return std::clamp(moduli[1], 0.0, 1.0);
}

std::vector<double> cumulative(const Vector& v) {
  std::vector<double> cdf(static_cast<std::size_t>(v.size()));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    acc += v[i];
    cdf[static_cast<std::size_t>(i)] = acc;
  }
  cdf.back() = 1.0;
  return cdf;
}

}  // namespace

MarkovChain validate_chain(const Matrix& p) {
  if (p.rows() < 1 || p.rows() != p.cols()) {
    throw Error(ErrorCode::InvalidArgument, "transition matrix must be square with n >= 1");
  }
  if (!p.allFinite()) throw Error(ErrorCode::InvalidArgument, "transition matrix has non-finite entries");
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if ((p.row(i).array() < 0.0).any()) {
      throw Error(ErrorCode::NonStochasticRow, "row " + std::to_string(i) + " has a negative entry");
    }
    const double s = p.row(i).sum();
    if (std::abs(s - 1.0) > kRowSumTolerance) {
      throw Error(ErrorCode::NonStochasticRow,
                  "row " + std::to_string(i) + " sums to " + std::to_string(s));
    }
  }

  const auto forward = bfs_levels(p, false);
  const auto backward = bfs_levels(p, true);
  for (std::size_t i = 0; i < forward.size(); ++i) {
    if (forward[i] < 0 || backward[i] < 0) {
      throw Error(ErrorCode::Reducible, "state " + std::to_string(i) + " is not in the communicating class of state 0");
    }
  }

  // Period = gcd over edges u->v of level(u) + 1 - level(v).
  long period = 0;
  for (Eigen::Index u = 0; u < p.rows(); ++u) {
    for (Eigen::Index v = 0; v < p.cols(); ++v) {
      if (p(u, v) > 0.0) {
        const long d = forward[static_cast<std::size_t>(u)] + 1 - forward[static_cast<std::size_t>(v)];
        period = std::gcd(period, std::abs(d));
      }
    }
  }
  if (period != 1) throw Error(ErrorCode::Periodic, "chain has period " + std::to_string(period));

  MarkovChain chain;
  chain.transition_ = p;
  chain.stationary_ = solve_stationary(p);
  const Vector check = power_iterate_stationary(p);
  if ((chain.stationary_ - check).lpNorm<1>() > 1e-8) {
    throw Error(ErrorCode::NoConvergence, "linear solve and power iteration disagree on mu");
  }
  chain.slem_ = second_eigenvalue_modulus(p);
  if (chain.slem_ >= 1.0) throw Error(ErrorCode::NoConvergence, "second eigenvalue modulus is 1");
  chain.mixing_constant_ = chain.slem_ > 0.0 ? 1.0 / std::log(1.0 / chain.slem_) : 0.0;

  chain.row_cdf_.resize(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const auto cdf = cumulative(p.row(i).transpose());
    for (Eigen::Index j = 0; j < p.cols(); ++j) chain.row_cdf_(i, j) = cdf[static_cast<std::size_t>(j)];
  }
  chain.stationary_cdf_ = cumulative(chain.stationary_);
  return chain;
}

Vector solve_stationary(const Matrix& p) {
  const auto n = p.rows();
  // (P^T - I) mu = 0 with the last equation replaced by sum(mu) = 1.
  Matrix system = p.transpose() - Matrix::Identity(n, n);
  system.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs[n - 1] = 1.0;
  Vector mu = system.fullPivLu().solve(rhs);
  mu = mu.cwiseMax(0.0);
  return mu / mu.sum();
}

Vector power_iterate_stationary(const Matrix& p, std::size_t max_iterations) {
  const auto n = p.rows();
  Eigen::RowVectorXd mu = Eigen::RowVectorXd::Constant(n, 1.0 / static_cast<double>(n));
  Eigen::RowVectorXd next(n);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    next.noalias() = mu * p;
    next /= next.sum();
    const double change = (next - mu).lpNorm<1>();
    mu.swap(next);
    if (change < 1e-15) break;
  }
  return mu.transpose();
}

Vector stationary_distribution(const MarkovChain& chain) {
  Vector mu = solve_stationary(chain.transition());
  const Vector check = power_iterate_stationary(chain.transition());
  if ((mu - check).lpNorm<1>() > 1e-8) {
    throw Error(ErrorCode::NoConvergence, "linear solve and power iteration disagree on mu");
  }
  return mu;
}

double tv_distance(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) throw Error(ErrorCode::DimensionMismatch, "probability vectors differ in length");
  if (std::abs(p.sum() - 1.0) > 1e-10 || std::abs(q.sum() - 1.0) > 1e-10) {
    throw Error(ErrorCode::InvalidArgument, "probability vectors must sum to 1");
  }
  return 0.5 * (p - q).lpNorm<1>();
}

Matrix transition_power(const MarkovChain& chain, std::size_t k) {
  const auto n = static_cast<Eigen::Index>(chain.n_states());
  Matrix power = Matrix::Identity(n, n);
  Matrix scratch(n, n);
  for (std::size_t step = 1; step <= k; ++step) {
    scratch.noalias() = power * chain.transition();
    power.swap(scratch);
    if (step % kRenormaliseEvery == 0) renormalise_rows(power);
  }
  return power;
}

Vector distribution_after(const MarkovChain& chain, State start, std::size_t k) {
  if (start >= chain.n_states()) throw Error(ErrorCode::InvalidState, "start state out of range");
  Eigen::RowVectorXd dist = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(chain.n_states()));
  dist[start] = 1.0;
  Eigen::RowVectorXd scratch(dist.size());
  for (std::size_t step = 1; step <= k; ++step) {
    scratch.noalias() = dist * chain.transition();
    dist.swap(scratch);
    if (step % kRenormaliseEvery == 0) dist /= dist.sum();
  }
  return dist.transpose();
}

std::size_t geometric_mixing_time(double mixing_constant, double alpha) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidArgument, "alpha must be positive");
  if (alpha >= 1.0 || mixing_constant <= 0.0) return 0;
  const double value = mixing_constant * -std::log(alpha);
  return static_cast<std::size_t>(std::ceil(value - 1e-9 * std::max(1.0, value)));
}

namespace {

double worst_start_tv(const Matrix& power, const Vector& mu) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < power.rows(); ++i) {
    worst = std::max(worst, 0.5 * (power.row(i).transpose() - mu).lpNorm<1>());
  }
  return worst;
}

}  // namespace

MixingTime mixing_time(const MarkovChain& chain, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  const auto n = static_cast<Eigen::Index>(chain.n_states());
  Matrix power = chain.transition();
  Matrix scratch(n, n);
  for (std::size_t k = 1; k <= kMixingHorizon; ++k) {
    if (worst_start_tv(power, chain.stationary()) <= alpha) {
      return {k, geometric_mixing_time(chain.mixing_constant(), alpha)};
    }
    scratch.noalias() = power * chain.transition();
    power.swap(scratch);
    if (k % kRenormaliseEvery == 0) renormalise_rows(power);
  }
  throw Error(ErrorCode::HorizonExceeded, "total variation did not reach alpha within 10^6 steps");
}

MixingProfile mixing_profile(const MarkovChain& chain, std::size_t k_max) {
  const auto n = static_cast<Eigen::Index>(chain.n_states());
  MixingProfile profile;
  profile.d_tv.reserve(k_max);
  Matrix power = chain.transition();
  Matrix scratch(n, n);
  for (std::size_t k = 1; k <= k_max; ++k) {
    profile.d_tv.push_back(worst_start_tv(power, chain.stationary()));
    scratch.noalias() = power * chain.transition();
    power.swap(scratch);
    if (k % kRenormaliseEvery == 0) renormalise_rows(power);
  }
  return profile;
}

StateSequence sample_path(const MarkovChain& chain, State start, std::size_t length,
                          std::uint64_t seed) {
  if (start >= chain.n_states()) throw Error(ErrorCode::InvalidState, "start state out of range");
  StateSequence path;
  path.reserve(length);
  if (length == 0) return path;
  auto rng = Rng::stream(seed, "chain/path");
  const Matrix& cdf = chain.row_cdf();
  const auto n = static_cast<std::size_t>(cdf.cols());
  // Row-major copy so each row's CDF is contiguous.
  std::vector<double> rows(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      rows[i * n + j] = cdf(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  State current = start;
  path.push_back(current);
  for (std::size_t t = 1; t < length; ++t) {
    current = static_cast<State>(rng.categorical(std::span<const double>(rows.data() + current * n, n)));
    path.push_back(current);
  }
  return path;
}

StateSequence sample_iid(const MarkovChain& chain, std::size_t length, std::uint64_t seed) {
  StateSequence draws;
  draws.reserve(length);
  auto rng = Rng::stream(seed, "chain/iid");
  const auto& cdf = chain.stationary_cdf();
  for (std::size_t t = 0; t < length; ++t) draws.push_back(static_cast<State>(rng.categorical(cdf)));
  return draws;
}

}  // namespace markov_sgd
