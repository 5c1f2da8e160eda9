#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace markov_sgd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using State = std::uint32_t;
using StateSequence = std::vector<State>;

/// Finite-state, irreducible, aperiodic Markov chain.
///
/// Instances only come out of validate_chain(), so every MarkovChain carries a
/// row-stochastic kernel, its stationary distribution, the second-largest
/// eigenvalue modulus and the geometric mixing constant C = 1/ln(1/slem).
/// Immutable after construction.
class MarkovChain {
 public:
  std::size_t n_states() const noexcept { return static_cast<std::size_t>(transition_.rows()); }
  const Matrix& transition() const noexcept { return transition_; }
  const Vector& stationary() const noexcept { return stationary_; }
  double slem() const noexcept { return slem_; }
  double mixing_constant() const noexcept { return mixing_constant_; }

  /// Row-wise cumulative sums of the kernel, used for sampling.
  const Matrix& row_cdf() const noexcept { return row_cdf_; }
  const std::vector<double>& stationary_cdf() const noexcept { return stationary_cdf_; }

 private:
  friend MarkovChain validate_chain(const Matrix& transition);
  MarkovChain() = default;

  Matrix transition_;
  Vector stationary_;
  double slem_ = 0.0;
  double mixing_constant_ = 0.0;
  Matrix row_cdf_;
  std::vector<double> stationary_cdf_;
};

/// Validates a transition matrix and populates mu, slem and C.
/// Throws NonStochasticRow, Reducible, Periodic or NoConvergence.
MarkovChain validate_chain(const Matrix& transition);

/// Solves mu P = mu, sum(mu) = 1 directly.
Vector solve_stationary(const Matrix& transition);

/// Fixed-point iteration mu <- mu P from the uniform distribution.
Vector power_iterate_stationary(const Matrix& transition, std::size_t max_iterations = 10'000'000);

/// Stationary distribution by linear solve, cross-checked against power
/// iteration (NoConvergence if they disagree by more than 1e-8 in L1).
Vector stationary_distribution(const MarkovChain& chain);

/// Half the L1 distance. Throws DimensionMismatch / InvalidArgument.
double tv_distance(const Vector& p, const Vector& q);

/// P^k by repeated multiplication, rows renormalised every 50 products.
Matrix transition_power(const MarkovChain& chain, std::size_t k);

/// Distribution of xi_k given xi_0 = start.
Vector distribution_after(const MarkovChain& chain, State start, std::size_t k);

struct MixingTime {
  std::size_t measured;     ///< smallest k with worst-start TV(P^k, mu) <= alpha
  std::size_t closed_form;  ///< ceil(C ln(1/alpha))
};

/// ceil(C ln(1/alpha)), 0 when alpha >= 1. A 1e-9 relative slack absorbs
/// rounding so that exact integers are not bumped to the next value.
std::size_t geometric_mixing_time(double mixing_constant, double alpha);

/// Throws HorizonExceeded if TV has not dropped to alpha within 10^6 steps.
MixingTime mixing_time(const MarkovChain& chain, double alpha);

struct MixingProfile {
  std::vector<double> d_tv;  ///< d_tv[k-1] = max_xi TV(P^k(xi, .), mu), k = 1..k_max
};

MixingProfile mixing_profile(const MarkovChain& chain, std::size_t k_max);

StateSequence sample_path(const MarkovChain& chain, State start, std::size_t length,
                          std::uint64_t seed);
StateSequence sample_iid(const MarkovChain& chain, std::size_t length, std::uint64_t seed);

}  // namespace markov_sgd
