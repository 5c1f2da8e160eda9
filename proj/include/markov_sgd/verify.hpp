#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "markov_sgd/chain.hpp"
#include "markov_sgd/engine.hpp"
#include "markov_sgd/objectives.hpp"
#include "markov_sgd/schedule.hpp"

namespace markov_sgd {

inline constexpr double kBiasTestRadius = 100.0;

/// ||sum_xi P^k(xi0, xi) grad G(x; xi) - grad f(x)||, exact through matrix powers.
/// RadiusExceeded when ||x|| > radius.
double conditional_bias(const MarkovChain& chain, const SampledObjective& objective, const Vector& x, State xi0,
                        std::size_t k, double radius = kBiasTestRadius);

struct Assumption3Check {
  bool holds = false;
  double worst_margin = 0.0;  ///< alpha - max_xi0 bias; negative when violated
  std::size_t tau = 0;
};

/// Bias at k = ceil(C ln(1/alpha)) for every start state, C taken from the schedule.
Assumption3Check check_assumption3(const MarkovChain& chain, const SampledObjective& objective,
                                   const StepSchedule& schedule, const Vector& x, double alpha,
                                   double radius = kBiasTestRadius);

/// Central differences of f with h = 1e-6 (1 + ||x||).
Vector finite_diff_grad(const SampledObjective& objective, const Vector& x);

/// Ensemble statistic at K*: E||x_K* - x^_K*||^2, or E[f(x_K*) - f*] for the
/// f-gap form of the nonconvex bound.
struct KstarStats {
  std::size_t kstar = 0;
  double value = 0.0;
};

/// Bound on E||x_{k+1} - x*||^2 for k >= K*. PremiseViolated when k < K* or sigma k/4 <= 1.
double bound_thm1(const KstarStats& stats, double m, double sigma, std::size_t k);
double bound_thm1_alt(const KstarStats& stats, double m, double sigma, std::size_t k);

struct Thm2Constants {
  double d1 = 0.0;
  double d2 = 0.0;
};
Thm2Constants thm2_constants(double m, double l, double opt_max_norm_sq);
Thm2Constants thm2_constants_alt(double m, double l, double opt_max_norm_sq);

/// Bound on E||x_{k+1} - x^_{k+1}||^2 for k >= K*.
double bound_thm2(const KstarStats& stats, double l, double sigma, double alpha0, double d1, double d2,
                  std::size_t k);
double bound_thm2_alt(const KstarStats& stats, double l, double sigma, double alpha0, double d1, double d2,
                      std::size_t k);

struct Thm3Constants {
  double d3 = 0.0;
  double d4 = 0.0;
};
/// DeltaDegenerate when delta >= 1 - 1e-9.
Thm3Constants thm3_constants(double m, double alpha0, double delta);
Thm3Constants thm3_constants_alt(double m, double alpha0, double delta);

/// Bound on E||grad f(x_R)||^2. With f_gap_form the leading 2L E||x - x^||^2 is
/// replaced by 4 E[f(x_K*) - f*].
double bound_thm3(const KstarStats& stats, double l, double m, double alpha0, double delta, std::size_t horizon,
                  bool f_gap_form = false);
double bound_thm3_alt(const KstarStats& stats, double l, double m, double alpha0, double delta,
                      std::size_t horizon, bool f_gap_form = false);

struct Lemma1Residual {
  std::size_t k = 0;
  double window = 0.0;  ///< ||x_k - x_{k - tau(alpha_k)}||
  double r_fine = 0.0;  ///< window - 6 M alpha_{k;tau} (||x_k|| + 1)
  double r_coarse = 0.0;  ///< window - (2||x_k|| + 2)
};

/// Residuals for every k >= K* covered by the full iterate record.
/// MissingIterates when the trajectory was not recorded in full.
std::vector<Lemma1Residual> audit_lemma1(const Trajectory& trajectory, const StepSchedule& schedule, double m);

struct InequalityTally {
  std::string name;
  std::size_t checked = 0;
  std::size_t violations = 0;
  double worst_slack = 0.0;  ///< smallest (rhs - lhs) / scale seen
};

struct AssumptionSuite {
  std::vector<InequalityTally> tallies;
  bool all_hold() const;
  const InequalityTally* first_failure() const;
};

/// Probes growth and smoothness on every family, strong convexity for
/// StronglyConvex, and EB, PL and QG for ErrorBound, at `probes` random points
/// (pairs for two-point inequalities) with ||x|| <= radius. Half of the points
/// are drawn at log-uniform distances from X* so the near-optimal regime is covered.
AssumptionSuite check_assumptions(const SampledObjective& objective, std::uint64_t seed,
                                  std::size_t probes = 10'000, double radius = 100.0, double tolerance = 1e-9);

}  // namespace markov_sgd
