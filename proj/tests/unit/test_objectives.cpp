#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "../support/instances.hpp"
#include "../support/oracles.hpp"
#include "markov_sgd/error.hpp"
#include "markov_sgd/objectives.hpp"
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

Vector random_point(std::mt19937_64& rng, std::size_t dim, double radius) {
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u;
  Vector v(static_cast<Eigen::Index>(dim));
  for (auto& x : v) x = n(rng);
  return v.normalized() * radius * std::pow(u(rng), 1.0 / static_cast<double>(dim));
}

std::vector<SampledObjective> all_instances() {
  const auto chain = instances::baseline_chain();
  return {instances::sc_baseline(chain), instances::eb_default(chain), instances::eb_theorem2(chain),
          instances::nc_default(chain), instances::nc_theorem3(chain)};
}

}  // namespace

TEST_CASE("strongly convex closed-form instances") {
  const auto one = strongly_convex_from({matrix({{2}})}, {vec({0})}, vec({1}));
  CHECK(one.sigma().value() == doctest::Approx(2.0));
  CHECK(one.smoothness() == doctest::Approx(2.0));
  CHECK(one.project_opt(vec({7}))[0] == doctest::Approx(0.0));
  CHECK(one.f_star().value() == doctest::Approx(0.0));

  const Matrix id = Matrix::Identity(2, 2);
  const auto ident = strongly_convex_from({id, id}, {vec({1, 2}), vec({3, -2})}, vec({0.25, 0.75}));
  CHECK(ident.sigma().value() == doctest::Approx(1.0));
  CHECK(ident.smoothness() == doctest::Approx(1.0));
  const Vector xs = ident.project_opt(Vector::Zero(2));
  CHECK(xs[0] == doctest::Approx(2.5));
  CHECK(xs[1] == doctest::Approx(-1.0));

  const auto unit = strongly_convex_from({id}, {Vector::Zero(2)}, vec({1}));
  const Vector g = unit.grad_sample(vec({3, 4}), 0);
  CHECK(g[0] == doctest::Approx(3.0));
  CHECK(g[1] == doctest::Approx(4.0));
  CHECK(g.norm() <= unit.growth_constant() * (5.0 + 1.0));
  CHECK(unit.growth_constant() == doctest::Approx(1.0));

  CHECK(code_of([] { strongly_convex_from({matrix({{1, 0}, {0, 0}})}, {vec({0, 0})}, vec({1})); }) ==
        ErrorCode::DegenerateSpectrum);
  CHECK(code_of([&] { unit.grad_sample(vec({std::nan(""), 0}), 0); }) == ErrorCode::NonFiniteInput);
}

TEST_CASE("strongly convex builder: sigma and L are the eigen-extremes of the mean Hessian") {
  const auto chain = instances::baseline_chain();
  const auto obj = instances::sc_baseline(chain);
  const auto& q = std::get<QuadraticFamily>(obj.data());
  Matrix mean = Matrix::Zero(3, 3);
  for (std::size_t i = 0; i < q.a.size(); ++i) mean += chain.stationary()[static_cast<Eigen::Index>(i)] * q.a[i];
  const auto ev = oracle::jacobi_eigenvalues(mean);
  CHECK(obj.sigma().value() == doctest::Approx(ev.front()).epsilon(1e-12));
  CHECK(obj.smoothness() == doctest::Approx(ev.back()).epsilon(1e-12));
  const Vector x = obj.project_opt(Vector::Zero(3));
  CHECK(obj.mean_gradient(x).norm() <= 1e-12);
  const Vector y = vec({0.3, -1.2, 2.0});
  CHECK((obj.mean_gradient(y) - (q.mean_a * y - q.mean_b)).norm() <= 1e-12);
}

TEST_CASE("error-bound closed-form instance") {
  const auto obj = error_bound_from(matrix({{1, 0}, {0, 0}}), vec({1, 0}), {0, 0}, vec({1}));
  CHECK(obj.sigma().value() == doctest::Approx(1.0));
  CHECK(obj.smoothness() == doctest::Approx(1.0));
  CHECK(obj.opt_set_kind() == OptSetKind::Affine);
  const Vector p = obj.project_opt(vec({3, 5}));
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] == doctest::Approx(5.0));
  CHECK(obj.f_star().value() == 0.0);
  CHECK(code_of([] { error_bound_from(matrix({{1, 0}, {0, 0}}), vec({1, 1}), {0, 0}, vec({1})); }) ==
        ErrorCode::RankInfeasible);
  CHECK(code_of([] { build_error_bound(3, 3, 2, vec({0.5, 0.5}), 1); }) == ErrorCode::RankInfeasible);
  CHECK(code_of([] { build_error_bound(3, 0, 2, vec({0.5, 0.5}), 1); }) == ErrorCode::RankInfeasible);
}

TEST_CASE("error-bound builder: exact rank, sigma, projection against least-norm oracle") {
  const auto chain = instances::baseline_chain();
  const auto obj = instances::eb_default(chain);
  const auto& ls = std::get<LeastSquaresFamily>(obj.data());
  const auto ev = oracle::jacobi_eigenvalues(ls.gram);
  const double tol = 1e-9 * ev.back();
  std::size_t zeros = 0;
  double smallest_nonzero = ev.back();
  for (double e : ev) {
    if (std::abs(e) <= tol) ++zeros;
    else smallest_nonzero = std::min(smallest_nonzero, e);
  }
  CHECK(zeros == 2);
  CHECK(obj.sigma().value() == doctest::Approx(smallest_nonzero).epsilon(1e-10));
  CHECK(obj.smoothness() == doctest::Approx(ev.back()).epsilon(1e-10));

  // Stack the importance-weighted rows back into A and b.
  Eigen::Index rows = 0;
  for (const auto& a : ls.a) rows += a.rows();
  Matrix a_full(rows, 4);
  Vector b_full(rows);
  Eigen::Index r = 0;
  for (std::size_t s = 0; s < ls.a.size(); ++s) {
    const double w = 1.0 / std::sqrt(chain.stationary()[static_cast<Eigen::Index>(s)]);
    a_full.middleRows(r, ls.a[s].rows()) = ls.a[s] * w * std::sqrt(chain.stationary()[static_cast<Eigen::Index>(s)]);
    b_full.segment(r, ls.b[s].size()) = ls.b[s] * w * std::sqrt(chain.stationary()[static_cast<Eigen::Index>(s)]);
    r += ls.a[s].rows();
  }
  std::mt19937_64 rng(5);
  const Eigen::JacobiSVD<Matrix> svd(a_full, Eigen::ComputeFullU | Eigen::ComputeFullV);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector x = random_point(rng, 4, 10.0);
    // x - A^+ (A x - b) is the nearest solution of A y = b.
    const Vector ref = x - svd.solve(a_full * x - b_full);
    CHECK((obj.project_opt(x) - ref).norm() <= 1e-10 * (1.0 + ref.norm()));
    CHECK(obj.mean_gradient(obj.project_opt(x)).norm() <= 1e-10);
    const Vector p = obj.project_opt(x);
    CHECK((obj.project_opt(p) - p).norm() <= 1e-10 * (1.0 + p.norm()));
  }
}

TEST_CASE("nonconvex closed-form instances") {
  const auto quad = nonconvex_from(1.5, {{0.0, vec({1, 0}), 0.3}}, vec({1}));
  const Vector x = vec({2, -1});
  CHECK((quad.mean_gradient(x) - 1.5 * x).norm() <= 1e-14);
  CHECK(quad.f_star().value() == doctest::Approx(0.0).epsilon(1e-10));

  const auto one = nonconvex_from(1.0, {{2.0, vec({1}), 0.0}}, vec({1}));
  CHECK(one.hessian(vec({0}))(0, 0) == doctest::Approx(-1.0));
  CHECK(one.grad_sample(vec({0}), 0)[0] == 0.0);
  CHECK(one.growth_constant() == doctest::Approx(2.0));
  CHECK(one.smoothness() == doctest::Approx(3.0));
  const auto [xmin, fmin] = oracle::grid_minimum([](double t) { return 0.5 * t * t + 2.0 * std::cos(t); }, -10, 10, 1e-4);
  CHECK(one.f_star().value() == doctest::Approx(fmin).epsilon(1e-10));
  CHECK(std::abs(one.project_opt(vec({5}))[0]) == doctest::Approx(std::abs(xmin)).epsilon(1e-6));

  const auto high = build_nonconvex(3, 2, vec({0.5, 0.5}), 0.5, 1);
  CHECK(high.opt_set_kind() == OptSetKind::Unavailable);
  CHECK(code_of([&] { high.project_opt(Vector::Zero(3)); }) == ErrorCode::OptSetUnavailable);
  CHECK(min_probed_curvature(high, 3) < 0.0);
  CHECK(code_of([] { build_nonconvex(2, 2, vec({0.5, 0.5}), 0.5, 1, {0.0, 1.0, 0.0}); }) ==
        ErrorCode::ConvexityNotBroken);
}

TEST_CASE("nonconvex builder is verifiably nonconvex and its minimiser is optimal") {
  const auto chain = instances::baseline_chain();
  for (const auto& obj : {instances::nc_default(chain), instances::nc_theorem3(chain)}) {
    CHECK(min_probed_curvature(obj, 7) < 0.0);
    const Vector xs = obj.project_opt(Vector::Zero(2));
    CHECK(obj.mean_gradient(xs).norm() <= 1e-10);
    std::mt19937_64 rng(9);
    for (int i = 0; i < 2000; ++i) {
      const Vector y = random_point(rng, 2, 5.0);
      CHECK(obj.f_value(y) >= obj.f_star().value() - 1e-12);
    }
  }
}

TEST_CASE("every instance: growth, mean gradient, finite differences, smoothness") {
  std::mt19937_64 rng(2024);
  for (const auto& obj : all_instances()) {
    const auto d = obj.dim();
    std::size_t growth_violations = 0;
    for (int i = 0; i < 10000; ++i) {
      const Vector x = random_point(rng, d, 100.0);
      const auto xi = static_cast<State>(i % static_cast<int>(obj.n_states()));
      if (obj.grad_sample(x, xi).norm() > obj.growth_constant() * (x.norm() + 1.0)) ++growth_violations;
    }
    CHECK(growth_violations == 0);

    for (int i = 0; i < 200; ++i) {
      const Vector x = random_point(rng, d, 10.0);
      Vector manual = Vector::Zero(static_cast<Eigen::Index>(d));
      for (State s = 0; s < obj.n_states(); ++s) manual += obj.mu()[s] * obj.grad_sample(x, s);
      CHECK((obj.mean_gradient(x) - manual).norm() == 0.0);
      const Vector fd = finite_diff_grad(obj, x);
      CHECK((fd - obj.mean_gradient(x)).norm() <= 1e-6 * std::max(1.0, obj.mean_gradient(x).norm()));
    }

    std::size_t smooth_violations = 0;
    for (int i = 0; i < 1000; ++i) {
      const Vector x = random_point(rng, d, 100.0), y = random_point(rng, d, 100.0);
      if ((obj.mean_gradient(x) - obj.mean_gradient(y)).norm() > obj.smoothness() * (x - y).norm() * (1 + 1e-9))
        ++smooth_violations;
    }
    CHECK(smooth_violations == 0);
  }
}

TEST_CASE("strong convexity and error-bound inequalities on random samples") {
  std::mt19937_64 rng(77);
  const auto chain = instances::baseline_chain();
  const auto sc = instances::sc_baseline(chain);
  const double s = sc.sigma().value();
  for (int i = 0; i < 1000; ++i) {
    const Vector x = random_point(rng, 3, 100.0), y = random_point(rng, 3, 100.0);
    const double lhs = sc.f_value(x) - sc.f_value(y) - sc.mean_gradient(y).dot(x - y);
    CHECK(lhs - 0.5 * s * (x - y).squaredNorm() >= -1e-9 * std::max(1.0, std::abs(lhs)));
  }
  const auto eb = instances::eb_default(chain);
  for (int i = 0; i < 1000; ++i) {
    const Vector x = random_point(rng, 4, 100.0);
    CHECK(eb.mean_gradient(x).norm() >= eb.sigma().value() * (x - eb.project_opt(x)).norm() * (1 - 1e-9));
  }
}
