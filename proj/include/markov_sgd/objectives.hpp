#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "markov_sgd/chain.hpp"

namespace markov_sgd {

enum class Regime { StronglyConvex, ErrorBound, Nonconvex };

std::string_view to_string(Regime regime) noexcept;
Regime parse_regime(std::string_view name);

enum class OptSetKind {
  Point,              ///< unique minimiser
  Affine,             ///< {x : Ax = b}
  NumericLowerBound,  ///< global minimiser located by grid search (dim <= 2)
  Unavailable,        ///< nonconvex with dim > 2
};

/// Per-state strongly convex quadratic G(x; xi) = 1/2 x^T A_xi x - b_xi^T x.
struct QuadraticFamily {
  std::vector<Matrix> a;
  std::vector<Vector> b;
  Matrix mean_a;
  Vector mean_b;
  Vector minimiser;
};

/// Row-partitioned least squares with importance weights 1/mu_xi, so that
/// sum_xi mu_xi G(x; xi) = 1/2 ||Ax - b||^2.
struct LeastSquaresFamily {
  std::vector<Matrix> a;        ///< rows owned by each state
  std::vector<Vector> b;
  std::vector<Matrix> hessian;  ///< (1/mu) A_xi^T A_xi
  std::vector<Vector> linear;   ///< (1/mu) A_xi^T b_xi
  Matrix gram;                  ///< A^T A
  Vector atb;                   ///< A^T b
  Matrix gram_pinv;
  Vector min_norm_solution;
  std::size_t rank = 0;
};

struct CosineTerm {
  double c = 0.0;
  Vector v;
  double phi = 0.0;
};

/// G(x; xi) = a/2 ||x||^2 + c_xi cos(v_xi^T x + phi_xi).
struct CosineFamily {
  double a = 0.0;
  std::vector<CosineTerm> terms;
  std::optional<Vector> minimiser;
};

/// A family {G(.; xi)} paired with the stationary distribution mu, together
/// with the constants M (gradient growth), L (smoothness) and sigma (strong
/// convexity or error bound), and a description of the optimal set.
///
/// Immutable; every evaluation is const and thread-safe.
class SampledObjective {
 public:
  using Data = std::variant<QuadraticFamily, LeastSquaresFamily, CosineFamily>;

  SampledObjective(Regime regime, Vector mu, Data data);

  Regime regime() const noexcept { return regime_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t n_states() const noexcept { return static_cast<std::size_t>(mu_.size()); }
  const Vector& mu() const noexcept { return mu_; }
  double growth_constant() const noexcept { return growth_; }
  double smoothness() const noexcept { return smoothness_; }
  std::optional<double> sigma() const noexcept { return sigma_; }
  OptSetKind opt_set_kind() const noexcept { return opt_kind_; }
  std::optional<double> f_star() const noexcept { return f_star_; }
  const Data& data() const noexcept { return data_; }

  /// Exact per-state gradient. Checks its inputs (NonFiniteInput, InvalidState).
  Vector grad_sample(const Vector& x, State xi) const;

  /// Unchecked per-state gradient written into `out` (hot path of the engine).
  void grad_sample_into(const Vector& x, State xi, Vector& out) const;

  double sample_value(const Vector& x, State xi) const;

  /// sum_xi mu_xi grad_sample(x, xi), evaluated along the same arithmetic path.
  Vector mean_gradient(const Vector& x) const;

  double f_value(const Vector& x) const;

  /// Euclidean projection onto X*. OptSetUnavailable for nonconvex dim > 2.
  Vector project_opt(const Vector& x) const;

  /// max ||x||^2 over X* intersected with the ball of the given radius.
  /// OptSetUnbounded for an affine X* with an infinite radius.
  double opt_max_norm_sq(double radius) const;

  /// Hessian of f at x.
  Matrix hessian(const Vector& x) const;

 private:
  void check_point(const Vector& x) const;

  Regime regime_;
  Vector mu_;
  Data data_;
  std::size_t dim_ = 0;
  double growth_ = 0.0;
  double smoothness_ = 0.0;
  std::optional<double> sigma_;
  OptSetKind opt_kind_ = OptSetKind::Unavailable;
  std::optional<double> f_star_;
};

struct StronglyConvexOptions {
  double eig_lo = 0.9;            ///< spectrum of the mean Hessian
  double eig_hi = 1.0;
  double heterogeneity = 0.02;    ///< spectral norm of the per-state Hessian perturbation
  double b_scale = 0.5;           ///< norm of the mean linear term
  double b_heterogeneity = 0.1;   ///< norm of the per-state linear perturbation
};

SampledObjective build_strongly_convex(std::size_t dim, std::size_t n_states, const Vector& mu,
                                       std::uint64_t seed, const StronglyConvexOptions& options = {});

/// DegenerateSpectrum if lambda_min(sum mu A) <= 1e-8.
SampledObjective strongly_convex_from(std::vector<Matrix> a, std::vector<Vector> b, const Vector& mu);

struct ErrorBoundOptions {
  double eig_lo = 4.0;            ///< nonzero spectrum of A^T A
  double eig_hi = 8.0;
  double heterogeneity = 0.01;    ///< per-state Gram perturbation (relative)
  double solution_scale = 1.0;    ///< norm of the planted solution
};

/// RankInfeasible unless 1 <= rank < dim.
SampledObjective build_error_bound(std::size_t dim, std::size_t rank, std::size_t n_states,
                                   const Vector& mu, std::uint64_t seed,
                                   const ErrorBoundOptions& options = {});

/// Rows of `a` are assigned to states by `row_state`. RankInfeasible when
/// b is not in range(A) or A = 0.
SampledObjective error_bound_from(const Matrix& a, const Vector& b, const std::vector<State>& row_state,
                                  const Vector& mu);

struct NonconvexOptions {
  double c_scale = 1.0;
  double v_scale = 1.0;           ///< norm of the frequency vectors
  double heterogeneity = 0.1;
};

/// ConvexityNotBroken if no draw shows a negative Hessian eigenvalue within
/// 100 attempts.
SampledObjective build_nonconvex(std::size_t dim, std::size_t n_states, const Vector& mu, double a,
                                 std::uint64_t seed, const NonconvexOptions& options = {});

SampledObjective nonconvex_from(double a, std::vector<CosineTerm> terms, const Vector& mu);

/// Smallest Hessian eigenvalue of f over random probes in the box where the
/// global minimiser can live. Negative means verifiably nonconvex.
double min_probed_curvature(const SampledObjective& objective, std::uint64_t seed, std::size_t probes = 1000);

}  // namespace markov_sgd
