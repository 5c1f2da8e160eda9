#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "../support/instances.hpp"
#include "../support/oracles.hpp"
#include "markov_sgd/error.hpp"
#include "markov_sgd/verify.hpp"

using namespace markov_sgd;
using instances::matrix;
using instances::vec;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

// Plug-in evaluations of the bounds, written out term by term.
double thm1_ref(double kstar, double e, double m, double s, double k) {
  return kstar * (kstar - 2) / (k * k) * e + 320 * (15 * m * m + 1) * std::log(s * k / 4) / (k * s);
}

double d1_ref(double m, double l, double r) { return 4 * m * m * l + 4 * m + (2 * m + 8 * m * m * l) * r; }
double d2_ref(double m, double l, double r) { return 24 * m * m * l + 48 * m * m * l * r; }

double thm2_ref(double kstar, double e, double l, double s, double a0, double d1, double d2, double k) {
  return l * l * (kstar - 1) * (kstar - 1) * e / (4 * s * k * k) + l * a0 * a0 * d1 / (2 * s * k) +
         l * a0 * d2 * std::log(k / a0) / (s * k);
}

double d3_ref(double m, double a, double d) {
  return 3 * a * a / (1 - d * d) + 3 * m * m * std::pow(a, 4) / std::pow(1 - d, 3) + 24 * m * m * a * a / std::pow(1 - d, 2);
}

double d4_ref(double m, double a, double d) {
  const double r2 = std::sqrt(2.0);
  return 3 * r2 * a * a / (1 - d) + 3 * r2 * m * m * std::pow(a, 4) / ((1 - d) * (1 - std::sqrt(d))) +
         24 * r2 * m * m * a * a / std::pow(1 - d, 2);
}

double thm3_ref(double e, double l, double m, double a, double d, double t, bool fgap) {
  const double d3 = d3_ref(m, a, d), d4 = d4_ref(m, a, d);
  const double lead = fgap ? 4 * e : 2 * l * e;
  return (lead + 4 * d3 * m * (4 * m * l + 1) + 96 * d4 * m * m * l) / (3 * a * std::sqrt(t)) +
         (4 * a * a * (1 + std::log(t)) + 2 * std::pow(std::log(t / a), 2)) / (3 * a * std::sqrt(t));
}

}  // namespace

TEST_CASE("conditional bias: exact cases") {
  const auto uniform = validate_chain(matrix({{0.5, 0.5}, {0.5, 0.5}}));
  const auto het = strongly_convex_from({matrix({{1}}), matrix({{1}})}, {vec({-1}), vec({2})}, uniform.stationary());
  CHECK(conditional_bias(uniform, het, vec({0.3}), 0, 1) == doctest::Approx(0.0).epsilon(1e-15));

  const auto chain = validate_chain(matrix({{0.9, 0.1}, {0.2, 0.8}}));
  // grad G(x;0) = x + 1, grad G(x;1) = x - 2, so g(x) = x.
  const auto obj = strongly_convex_from({matrix({{1}}), matrix({{1}})}, {vec({-1}), vec({2})}, chain.stationary());
  CHECK(obj.mean_gradient(vec({0.7}))[0] == doctest::Approx(0.7).epsilon(1e-14));
  for (std::size_t k : {1u, 2u, 5u, 20u}) {
    const double decay = std::pow(0.7, static_cast<double>(k));
    CHECK(conditional_bias(chain, obj, vec({0.7}), 0, k) == doctest::Approx(decay).epsilon(1e-10));
    CHECK(conditional_bias(chain, obj, vec({-4}), 1, k) == doctest::Approx(2 * decay).epsilon(1e-10));
  }

  const auto same = strongly_convex_from({matrix({{2}}), matrix({{2}})}, {vec({1}), vec({1})}, chain.stationary());
  for (std::size_t k : {1u, 3u, 10u}) CHECK(conditional_bias(chain, same, vec({5}), 1, k) <= 1e-14);
  CHECK(code_of([&] { conditional_bias(chain, obj, vec({101}), 0, 1); }) == ErrorCode::RadiusExceeded);
}

TEST_CASE("conditional bias: coupling bound and monotone decay") {
  const auto chain = instances::baseline_chain();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (const auto& obj : {instances::sc_baseline(chain), instances::eb_default(chain), instances::nc_default(chain)}) {
    for (int trial = 0; trial < 20; ++trial) {
      Vector x(static_cast<Eigen::Index>(obj.dim()));
      for (auto& v : x) v = 3.0 * n(rng);
      double previous = 1e300;
      for (std::size_t k = 1; k <= 30; ++k) {
        double worst = 0.0;
        for (State s = 0; s < chain.n_states(); ++s) {
          const double b = conditional_bias(chain, obj, x, s, k);
          const double tv = tv_distance(distribution_after(chain, s, k), chain.stationary());
          CHECK(b <= 2 * obj.growth_constant() * (x.norm() + 1) * tv + 1e-9);
          worst = std::max(worst, b);
        }
        CHECK(worst <= previous + 1e-12);
        previous = worst;
      }
    }
  }
}

TEST_CASE("bias bound holds with the true C and fails when C is halved") {
  const auto chain = validate_chain(matrix({{0.995, 0.005}, {0.005, 0.995}}));
  REQUIRE(chain.slem() == doctest::Approx(0.99));
  const auto obj = strongly_convex_from({matrix({{1}}), matrix({{1}})}, {vec({1}), vec({-1})}, chain.stationary());
  auto p = schedule_params_for(obj, chain.mixing_constant());
  const StepSchedule honest(p);
  p.mixing_constant = chain.mixing_constant() / 2.0;
  const StepSchedule halved(p);
  for (double alpha : {0.1, 0.01, 0.001}) {
    const auto ok = check_assumption3(chain, obj, honest, vec({0.5}), alpha);
    CHECK(ok.holds);
    CHECK(ok.worst_margin >= 0.0);
    const auto bad = check_assumption3(chain, obj, halved, vec({0.5}), alpha);
    CHECK_FALSE(bad.holds);
    CHECK(bad.worst_margin < 0.0);
    CHECK(bad.tau < ok.tau);
  }
  const auto loose = check_assumption3(instances::baseline_chain(), instances::sc_baseline(instances::baseline_chain()),
                                       StepSchedule(schedule_params_for(instances::sc_baseline(instances::baseline_chain()),
                                                                        instances::baseline_chain().mixing_constant())),
                                       Vector::Zero(3), 0.99);
  CHECK(loose.holds);
  CHECK(loose.worst_margin > 0.5);
  const auto same = strongly_convex_from({matrix({{1}}), matrix({{1}})}, {vec({1}), vec({1})}, chain.stationary());
  for (double alpha : {0.5, 0.01, 1e-6}) CHECK(check_assumption3(chain, same, halved, vec({3}), alpha).holds);
}

TEST_CASE("finite-difference gradient") {
  const auto sq = strongly_convex_from({matrix({{2}})}, {vec({0})}, vec({1}));
  CHECK(finite_diff_grad(sq, vec({3}))[0] == doctest::Approx(6.0).epsilon(1e-6));
  const auto nc = nonconvex_from(1.0, {{2.0, vec({1}), 0.0}}, vec({1}));
  const double analytic = 1.0 - 2.0 * std::sin(1.0);
  CHECK(finite_diff_grad(nc, vec({1}))[0] == doctest::Approx(analytic).epsilon(1e-6));
  const auto chain = instances::baseline_chain();
  for (const auto& obj : {instances::sc_baseline(chain), instances::eb_default(chain), instances::nc_default(chain)}) {
    CHECK(finite_diff_grad(obj, obj.project_opt(Vector::Ones(static_cast<Eigen::Index>(obj.dim())))).norm() <= 1e-5);
  }
}

TEST_CASE("strongly convex bound") {
  const KstarStats s{4, 9.0};
  const double expected = 4.0 * 2.0 / 1e4 * 9.0 + 320.0 * 16.0 * std::log(100.0) / 400.0;
  CHECK(bound_thm1(s, 1.0, 4.0, 100) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(bound_thm1_alt(s, 1.0, 4.0, 100) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(bound_thm1(KstarStats{2, 1e6}, 1.0, 4.0, 100) == doctest::Approx(320.0 * 16.0 * std::log(100.0) / 400.0));
  double previous = 1e300;
  for (std::size_t k = 10; k <= 100'000'000; k *= 10) {
    const double b = bound_thm1(KstarStats{10, 3.0}, 1.3, 0.9, k);
    CHECK(b == doctest::Approx(thm1_ref(10, 3.0, 1.3, 0.9, static_cast<double>(k))).epsilon(1e-12));
    CHECK(b == doctest::Approx(bound_thm1_alt(KstarStats{10, 3.0}, 1.3, 0.9, k)).epsilon(1e-12));
    CHECK(b > 0.0);
    CHECK(b < previous);
    previous = b;
  }
  CHECK(previous < 0.01);
  CHECK(code_of([] { bound_thm1(KstarStats{10, 1.0}, 1.0, 4.0, 9); }) == ErrorCode::PremiseViolated);
  CHECK(code_of([] { bound_thm1(KstarStats{1, 1.0}, 1.0, 0.1, 20); }) == ErrorCode::PremiseViolated);
}

TEST_CASE("error bound constants and bound") {
  auto c = thm2_constants(1.0, 1.0, 0.0);
  CHECK(c.d1 == 8.0);
  CHECK(c.d2 == 24.0);
  c = thm2_constants(0.7, 2.5, 0.0);
  CHECK(c.d1 == doctest::Approx(4 * 0.49 * 2.5 + 2.8));
  CHECK(c.d2 == doctest::Approx(24 * 0.49 * 2.5));
  for (double r : {0.0, 1.7, 42.0}) {
    const auto a = thm2_constants(0.3, 1.9, r), b = thm2_constants_alt(0.3, 1.9, r);
    CHECK(a.d1 == doctest::Approx(d1_ref(0.3, 1.9, r)).epsilon(1e-14));
    CHECK(a.d2 == doctest::Approx(d2_ref(0.3, 1.9, r)).epsilon(1e-14));
    CHECK(a.d1 == doctest::Approx(b.d1).epsilon(1e-12));
    CHECK(a.d2 == doctest::Approx(b.d2).epsilon(1e-12));
  }

  const auto chain = instances::baseline_chain();
  const auto obj = instances::eb_theorem2(chain);
  const StepSchedule sched(schedule_params_for(obj, chain.mixing_constant()));
  const double m = obj.growth_constant(), l = obj.smoothness(), s = obj.sigma().value();
  const double r2 = obj.opt_max_norm_sq(10.0 * (1.0 + obj.project_opt(Vector::Zero(4)).norm()));
  const auto d = thm2_constants(m, l, r2);
  const KstarStats st{sched.kstar(), 2.5};
  double previous = 1e300;
  for (std::size_t k = 1000; k <= 10'000'000; k *= 10) {
    const double b = bound_thm2(st, l, s, sched.alpha0(), d.d1, d.d2, k);
    CHECK(b == doctest::Approx(thm2_ref(static_cast<double>(st.kstar), 2.5, l, s, sched.alpha0(), d1_ref(m, l, r2),
                                        d2_ref(m, l, r2), static_cast<double>(k)))
                   .epsilon(1e-12));
    CHECK(b == doctest::Approx(bound_thm2_alt(st, l, s, sched.alpha0(), d.d1, d.d2, k)).epsilon(1e-12));
    CHECK(b > 0.0);
    CHECK(b < previous);
    previous = b;
  }
  CHECK(code_of([&] { bound_thm2(st, l, s, sched.alpha0(), d.d1, d.d2, st.kstar - 1); }) == ErrorCode::PremiseViolated);
  CHECK(code_of([&] { obj.opt_max_norm_sq(std::numeric_limits<double>::infinity()); }) == ErrorCode::OptSetUnbounded);
}

TEST_CASE("nonconvex constants and bound") {
  const auto c = thm3_constants(1.0, 0.1, 0.5);
  CHECK(c.d3 == doctest::Approx(1.0024).epsilon(1e-14));
  CHECK(thm3_constants_alt(1.0, 0.1, 0.5).d3 == doctest::Approx(1.0024).epsilon(1e-12));
  for (double a : {1e-3, 1e-5, 1e-8}) {
    const auto small = thm3_constants(2.0, a, 0.9);
    CHECK(small.d3 <= 1e5 * a * a);
    CHECK(small.d4 <= 1e5 * a * a);
  }
  for (double delta : {0.2, 0.9, 0.9999}) {
    const auto a = thm3_constants(1.7, 0.01, delta), b = thm3_constants_alt(1.7, 0.01, delta);
    CHECK(a.d3 == doctest::Approx(d3_ref(1.7, 0.01, delta)).epsilon(1e-13));
    CHECK(a.d4 == doctest::Approx(d4_ref(1.7, 0.01, delta)).epsilon(1e-13));
    CHECK(a.d3 == doctest::Approx(b.d3).epsilon(1e-12));
    CHECK(a.d4 == doctest::Approx(b.d4).epsilon(1e-12));
  }
  CHECK(code_of([] { thm3_constants(1.0, 0.1, 1.0 - 1e-10); }) == ErrorCode::DeltaDegenerate);

  const KstarStats st{64, 0.8};
  for (bool fgap : {false, true}) {
    double previous = 1e300;
    for (std::size_t t = 1000; t <= 1'000'000'000; t *= 10) {
      const double b = bound_thm3(st, 20.0, 1.02, 1e-3, 0.99, t, fgap);
      CHECK(b == doctest::Approx(thm3_ref(0.8, 20.0, 1.02, 1e-3, 0.99, static_cast<double>(t), fgap)).epsilon(1e-12));
      CHECK(b == doctest::Approx(bound_thm3_alt(st, 20.0, 1.02, 1e-3, 0.99, t, fgap)).epsilon(1e-12));
      CHECK(b > 0.0);
      CHECK(b < previous);
      previous = b;
    }
  }
  CHECK(bound_thm3(st, 2.0, 1.0, 0.1, 0.5, 1000, true) != bound_thm3(st, 20.0, 1.0, 0.1, 0.5, 1000, false));
  CHECK(code_of([&] { bound_thm3(st, 1, 1, 0.1, 0.5, 10); }) == ErrorCode::PremiseViolated);
}

TEST_CASE("one-step descent audit") {
  const auto one = validate_chain(matrix({{1.0}}));
  const auto flat = strongly_convex_from({matrix({{1}})}, {vec({1})}, vec({1}));
  const StepSchedule zero_tau(schedule_params_for(flat, 0.0));
  RunConfig cfg;
  cfg.horizon = 50;
  cfg.record_full = true;
  const auto t0 = run(one, flat, zero_tau, cfg);
  for (const auto& r : audit_lemma1(t0, zero_tau, flat.growth_constant())) {
    CHECK(r.window == 0.0);
    CHECK(r.r_fine == 0.0);
  }
  cfg.record_full = false;
  CHECK(code_of([&] { audit_lemma1(run(one, flat, zero_tau, cfg), zero_tau, 1.0); }) == ErrorCode::MissingIterates);

  const auto chain = instances::baseline_chain();
  const Matrix a = matrix({{1.0, 0.2}, {0.2, 0.9}});
  const auto indep = strongly_convex_from({a, a}, {vec({1, 0}), vec({1, 0})}, chain.stationary());
  const StepSchedule s(schedule_params_for(indep, chain.mixing_constant()));
  cfg.horizon = s.kstar() + 500;
  cfg.record_full = true;
  const auto res = audit_lemma1(run(chain, indep, s, cfg), s, indep.growth_constant());
  REQUIRE(res.size() == 501);
  for (const auto& r : res) {
    CHECK(r.r_fine < 0.0);
    CHECK(r.r_coarse < 0.0);
  }
}

TEST_CASE("one-step descent audit flags a growth constant that is too small") {
  const auto chain = instances::slow_chain();
  const auto obj = strongly_convex_from({matrix({{1}}), matrix({{1}})}, {vec({1}), vec({-1})}, chain.stationary());
  const StepSchedule s(schedule_params_for(obj, chain.mixing_constant()));
  RunConfig cfg;
  cfg.horizon = s.kstar() + 2000;
  cfg.record_full = true;
  cfg.seed = 4;
  const auto traj = run(chain, obj, s, cfg);
  const auto honest = audit_lemma1(traj, s, obj.growth_constant());
  std::size_t honest_violations = 0, mutant_violations = 0;
  for (const auto& r : honest) honest_violations += r.r_fine > 0.0 || r.r_coarse > 0.0;
  for (const auto& r : audit_lemma1(traj, s, obj.growth_constant() / 10.0)) mutant_violations += r.r_fine > 0.0;
  CHECK(honest_violations == 0);
  CHECK(mutant_violations > 0);
}

TEST_CASE("assumption suite on the library instances") {
  const auto chain = instances::baseline_chain();
  CHECK(check_assumptions(instances::sc_baseline(chain), 1, 2000).all_hold());
  CHECK(check_assumptions(instances::eb_default(chain), 1, 2000).all_hold());
  CHECK(check_assumptions(instances::nc_default(chain), 1, 2000).all_hold());
  // sigma = L = 1/4: PL and QG in the stated form need L >= 1 and L >= 4.
  const auto t2 = check_assumptions(instances::eb_theorem2(chain), 1, 2000);
  CHECK_FALSE(t2.all_hold());
  for (const auto& t : t2.tallies) {
    if (t.name == "pl" || t.name == "qg") CHECK(t.violations > 0);
    else CHECK(t.violations == 0);
  }
}
