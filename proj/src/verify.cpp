#include "markov_sgd/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "markov_sgd/error.hpp"
#include "markov_sgd/rng.hpp"

namespace markov_sgd {

double conditional_bias(const MarkovChain& chain, const SampledObjective& objective, const Vector& x, State xi0,
                        std::size_t k, double radius) {
  if (x.norm() > radius) throw Error(ErrorCode::RadiusExceeded, "test point outside the bias radius");
  if (chain.n_states() != objective.n_states()) {
    throw Error(ErrorCode::DimensionMismatch, "chain and objective disagree on the number of states");
  }
  const Vector dist = distribution_after(chain, xi0, k);
  Vector expected = Vector::Zero(x.size());
  for (std::size_t xi = 0; xi < chain.n_states(); ++xi) {
    expected += dist[static_cast<Eigen::Index>(xi)] * objective.grad_sample(x, static_cast<State>(xi));
  }
  return (expected - objective.mean_gradient(x)).norm();
}

Assumption3Check check_assumption3(const MarkovChain& chain, const SampledObjective& objective,
                                   const StepSchedule& schedule, const Vector& x, double alpha, double radius) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  Assumption3Check out;
  out.tau = geometric_mixing_time(schedule.mixing_constant(), alpha);
  double worst = 0.0;
  for (std::size_t xi0 = 0; xi0 < chain.n_states(); ++xi0) {
    worst = std::max(worst, conditional_bias(chain, objective, x, static_cast<State>(xi0), out.tau, radius));
  }
  out.worst_margin = alpha - worst;
  out.holds = worst <= alpha;
  return out;
}

Vector finite_diff_grad(const SampledObjective& objective, const Vector& x) {
  const double h = 1e-6 * (1.0 + x.norm());
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = objective.f_value(probe);
    probe[i] = x[i] - h;
    const double down = objective.f_value(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

namespace {

void require_after_kstar(const KstarStats& stats, std::size_t k) {
  if (k < stats.kstar) throw Error(ErrorCode::PremiseViolated, "bound evaluated before K*");
}

}  // namespace

double bound_thm1(const KstarStats& stats, double m, double sigma, std::size_t k) {
  require_after_kstar(stats, k);
  const double kd = static_cast<double>(k);
  const double ks = static_cast<double>(stats.kstar);
  const double log_term = std::log(sigma * kd / 4.0);
  if (!(log_term > 0.0)) throw Error(ErrorCode::PremiseViolated, "log(sigma k / 4) is not positive");
  return ks * (ks - 2.0) / (kd * kd) * stats.value + 320.0 * (15.0 * m * m + 1.0) * log_term / (kd * sigma);
}

double bound_thm1_alt(const KstarStats& stats, double m, double sigma, std::size_t k) {
  require_after_kstar(stats, k);
  const double kd = static_cast<double>(k);
  const double ks = static_cast<double>(stats.kstar);
  const double log_term = std::log(sigma) + std::log(kd) - 2.0 * std::numbers::ln2;
  if (!(log_term > 0.0)) throw Error(ErrorCode::PremiseViolated, "log(sigma k / 4) is not positive");
  const double transient = (ks * ks - 2.0 * ks) * stats.value / kd / kd;
  const double noise = (4800.0 * m * m + 320.0) / sigma * log_term / kd;
  return transient + noise;
}

Thm2Constants thm2_constants(double m, double l, double opt_max_norm_sq) {
  return {4.0 * m * m * l + 4.0 * m + (2.0 * m + 8.0 * m * m * l) * opt_max_norm_sq,
          24.0 * m * m * l + 48.0 * m * m * l * opt_max_norm_sq};
}

Thm2Constants thm2_constants_alt(double m, double l, double opt_max_norm_sq) {
  const double ml = m * l;
  return {2.0 * m * (2.0 * ml + 2.0 + (1.0 + 4.0 * ml) * opt_max_norm_sq),
          24.0 * ml * m * (1.0 + 2.0 * opt_max_norm_sq)};
}

double bound_thm2(const KstarStats& stats, double l, double sigma, double alpha0, double d1, double d2,
                  std::size_t k) {
  require_after_kstar(stats, k);
  const double kd = static_cast<double>(k);
  const double ks = static_cast<double>(stats.kstar);
  return l * l * (ks - 1.0) * (ks - 1.0) * stats.value / (4.0 * sigma * kd * kd) +
         l * alpha0 * alpha0 * d1 / (2.0 * sigma * kd) + l * alpha0 * d2 * std::log(kd / alpha0) / (sigma * kd);
}

double bound_thm2_alt(const KstarStats& stats, double l, double sigma, double alpha0, double d1, double d2,
                      std::size_t k) {
  require_after_kstar(stats, k);
  const double kd = static_cast<double>(k);
  const double ratio = (static_cast<double>(stats.kstar) - 1.0) / kd;
  const double common = l * alpha0 / (sigma * kd);
  return 0.25 * l * l / sigma * ratio * ratio * stats.value +
         common * (0.5 * alpha0 * d1 + d2 * (std::log(kd) - std::log(alpha0)));
}

Thm3Constants thm3_constants(double m, double alpha0, double delta) {
  if (!(delta < 1.0 - 1e-9)) throw Error(ErrorCode::DeltaDegenerate, "delta too close to 1");
  const double a2 = alpha0 * alpha0;
  const double a4 = a2 * a2;
  const double m2 = m * m;
  const double od = 1.0 - delta;
  const double d3 = 3.0 * a2 / (1.0 - delta * delta) + 3.0 * m2 * a4 / (od * od * od) + 24.0 * m2 * a2 / (od * od);
  const double d4 = 3.0 * std::numbers::sqrt2 * a2 / od +
                    3.0 * std::numbers::sqrt2 * m2 * a4 / (od * (1.0 - std::sqrt(delta))) +
                    24.0 * std::numbers::sqrt2 * m2 * a2 / (od * od);
  return {d3, d4};
}

Thm3Constants thm3_constants_alt(double m, double alpha0, double delta) {
  if (!(delta < 1.0 - 1e-9)) throw Error(ErrorCode::DeltaDegenerate, "delta too close to 1");
  const double ma = m * alpha0;
  const double inv = 1.0 / (1.0 - delta);
  const double base = 3.0 * alpha0 * alpha0;
  const double d3 = base * (1.0 / ((1.0 - delta) * (1.0 + delta)) + ma * ma * inv * inv * inv + 8.0 * m * m * inv * inv);
  const double d4 = std::sqrt(2.0) * base * inv *
                    (1.0 + ma * ma / (1.0 - std::sqrt(delta)) + 8.0 * m * m * inv);
  return {d3, d4};
}

double bound_thm3(const KstarStats& stats, double l, double m, double alpha0, double delta, std::size_t horizon,
                  bool f_gap_form) {
  if (horizon < stats.kstar) throw Error(ErrorCode::PremiseViolated, "T < K*");
  const auto c = thm3_constants(m, alpha0, delta);
  const double t = static_cast<double>(horizon);
  const double lead = f_gap_form ? 4.0 * stats.value : 2.0 * l * stats.value;
  const double denom = 3.0 * alpha0 * std::sqrt(t);
  const double log_ratio = std::log(t / alpha0);
  return (lead + 4.0 * c.d3 * m * (4.0 * m * l + 1.0) + 96.0 * c.d4 * m * m * l) / denom +
         (4.0 * alpha0 * alpha0 * (1.0 + std::log(t)) + 2.0 * log_ratio * log_ratio) / denom;
}

double bound_thm3_alt(const KstarStats& stats, double l, double m, double alpha0, double delta,
                      std::size_t horizon, bool f_gap_form) {
  if (horizon < stats.kstar) throw Error(ErrorCode::PremiseViolated, "T < K*");
  const auto c = thm3_constants_alt(m, alpha0, delta);
  const double t = static_cast<double>(horizon);
  const double log_t = std::log(t);
  const double log_ratio = log_t - std::log(alpha0);
  const double numerator = (f_gap_form ? 4.0 : 2.0 * l) * stats.value + 4.0 * m * c.d3 + 16.0 * m * m * l * c.d3 +
                           96.0 * m * m * l * c.d4 + 4.0 * alpha0 * alpha0 + 4.0 * alpha0 * alpha0 * log_t +
                           2.0 * log_ratio * log_ratio;
  return numerator / 3.0 / alpha0 / std::sqrt(t);
}

std::vector<Lemma1Residual> audit_lemma1(const Trajectory& trajectory, const StepSchedule& schedule, double m) {
  if (trajectory.iterates.empty()) throw Error(ErrorCode::MissingIterates, "trajectory has no full iterate record");
  const std::size_t n = trajectory.iterates.size();
  std::vector<Lemma1Residual> out;
  for (std::size_t k = schedule.kstar(); k <= n; ++k) {
    const std::size_t t = schedule.tau(k);
    const std::size_t lag = t >= k ? 1 : k - t;
    const Vector& xk = trajectory.iterates[k - 1];
    const Vector& xl = trajectory.iterates[lag - 1];
    const double window = (xk - xl).norm();
    const double norm = xk.norm();
    Lemma1Residual r;
    r.k = k;
    r.window = window;
    r.r_fine = window - 6.0 * m * schedule.alpha_window(k).value * (norm + 1.0);
    r.r_coarse = window - (2.0 * norm + 2.0);
    out.push_back(r);
  }
  return out;
}


bool AssumptionSuite::all_hold() const { return first_failure() == nullptr; }

const InequalityTally* AssumptionSuite::first_failure() const {
  for (const auto& t : tallies) {
    if (t.violations > 0) return &t;
  }
  return nullptr;
}

namespace {

class ProbeSampler {
 public:
  ProbeSampler(const SampledObjective& objective, std::uint64_t seed, double radius)
      : objective_(objective), rng_(Rng::stream(seed, "verify/probes")), radius_(radius) {
    const auto d = static_cast<Eigen::Index>(objective.dim());
    anchor_ = objective.opt_set_kind() == OptSetKind::Unavailable ? Vector::Zero(d)
                                                                  : objective.project_opt(Vector::Zero(d));
  }

  Vector next() {
    const auto d = static_cast<Eigen::Index>(objective_.dim());
    for (;;) {
      Vector dir(d);
      for (Eigen::Index i = 0; i < d; ++i) dir[i] = rng_.normal();
      if (dir.norm() < 1e-12) continue;
      dir.normalize();
      Vector x;
      if (flip_) {
        const double r = radius_ * std::pow(rng_.uniform(), 1.0 / static_cast<double>(d));
        x = r * dir;
      } else {
        const double r = std::pow(10.0, -4.0 + 6.0 * rng_.uniform());
        x = anchor_ + r * dir;
      }
      flip_ = !flip_;
      if (x.norm() <= radius_) return x;
    }
  }

 private:
  const SampledObjective& objective_;
  Rng rng_;
  double radius_;
  Vector anchor_;
  bool flip_ = true;
};

struct Tally {
  InequalityTally t;
  double tol;
  // Holds when rhs - lhs >= -tol * scale.
  void add(double lhs, double rhs, double scale) {
    ++t.checked;
    const double slack = (rhs - lhs) / std::max(1.0, scale);
    if (t.checked == 1 || slack < t.worst_slack) t.worst_slack = slack;
    if (!(rhs - lhs >= -tol * std::max(1.0, scale))) ++t.violations;
  }
};

}  // namespace

AssumptionSuite check_assumptions(const SampledObjective& objective, std::uint64_t seed, std::size_t probes,
                                  double radius, double tolerance) {
  ProbeSampler sampler(objective, seed, radius);
  auto rng = Rng::stream(seed, "verify/states");
  const double m = objective.growth_constant();
  const double l = objective.smoothness();
  const double sigma = objective.sigma().value_or(0.0);
  const std::size_t n_states = objective.n_states();

  Tally growth{{"growth"}, tolerance};
  Tally smooth{{"smoothness"}, tolerance};
  Tally strong{{"strong_convexity"}, tolerance};
  Tally eb{{"error_bound"}, tolerance};
  Tally pl{{"pl"}, tolerance};
  Tally qg{{"qg"}, tolerance};

  for (std::size_t i = 0; i < probes; ++i) {
    const Vector x = sampler.next();
    const Vector y = sampler.next();
    const auto xi = static_cast<State>(std::min<std::size_t>(
        n_states - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(n_states))));
    const double gnorm = objective.grad_sample(x, xi).norm();
    const double cap = m * (x.norm() + 1.0);
    growth.add(gnorm, cap, cap);

    const Vector gx = objective.mean_gradient(x);
    const Vector gy = objective.mean_gradient(y);
    const double lip = l * (x - y).norm();
    smooth.add((gx - gy).norm(), lip, lip);

    if (objective.regime() == Regime::StronglyConvex) {
      const double fx = objective.f_value(x);
      const double fy = objective.f_value(y);
      const double inner = gy.dot(x - y);
      const double lhs = 0.5 * sigma * (x - y).squaredNorm();
      strong.add(lhs, fx - fy - inner, std::abs(fx) + std::abs(fy) + std::abs(inner));
    } else if (objective.regime() == Regime::ErrorBound) {
      const double dist = (x - objective.project_opt(x)).norm();
      const double gn = gx.norm();
      eb.add(sigma * dist, gn, sigma * dist);
      const double gap = objective.f_value(x) - *objective.f_star();
      const double scale = std::abs(objective.f_value(x));
      pl.add(gap, l / (2.0 * sigma) * gn * gn, scale);
      qg.add(2.0 * sigma / l * dist * dist, gap, scale);
    }
  }

  AssumptionSuite suite;
  suite.tallies.push_back(growth.t);
  suite.tallies.push_back(smooth.t);
  if (objective.regime() == Regime::StronglyConvex) suite.tallies.push_back(strong.t);
  if (objective.regime() == Regime::ErrorBound) {
    suite.tallies.push_back(eb.t);
    suite.tallies.push_back(pl.t);
    suite.tallies.push_back(qg.t);
  }
  return suite;
}

}  // namespace markov_sgd
