#include "markov_sgd/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "markov_sgd/error.hpp"
#include "markov_sgd/rng.hpp"

namespace markov_sgd {

std::string_view to_string(Regime regime) noexcept {
  switch (regime) {
    case Regime::StronglyConvex: return "strongly_convex";
    case Regime::ErrorBound: return "error_bound";
    case Regime::Nonconvex: return "nonconvex";
  }
  return "unknown";
}

Regime parse_regime(std::string_view name) {
  if (name == "strongly_convex") return Regime::StronglyConvex;
  if (name == "error_bound") return Regime::ErrorBound;
  if (name == "nonconvex") return Regime::Nonconvex;
  throw Error(ErrorCode::ConfigError, "unknown regime '" + std::string(name) + "'");
}

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()[0];
}

Vector random_unit(Rng& rng, Eigen::Index dim) {
  Vector v(dim);
  do {
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = rng.normal();
  } while (v.norm() < 1e-12);
  return v.normalized();
}

Matrix random_orthogonal(Rng& rng, Eigen::Index dim) {
  Matrix g(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  return q;
}

Matrix random_symmetric_unit(Rng& rng, Eigen::Index dim) {
  Matrix g(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) g(i, j) = rng.normal();
  Matrix s = 0.5 * (g + g.transpose());
  const double norm = spectral_norm(s);
  return norm > 0.0 ? Matrix(s / norm) : s;
}

// Eigenvalues spread over [lo, hi] with both endpoints attained.
Vector spread_spectrum(Rng& rng, Eigen::Index count, double lo, double hi) {
  Vector eig(count);
  for (Eigen::Index i = 0; i < count; ++i) eig[i] = lo + (hi - lo) * rng.uniform();
  std::sort(eig.data(), eig.data() + count);
  eig[0] = lo;
  if (count > 1) eig[count - 1] = hi;
  return eig;
}

void check_mu(const Vector& mu, std::size_t n_states) {
  if (static_cast<std::size_t>(mu.size()) != n_states || n_states == 0) {
    throw Error(ErrorCode::DimensionMismatch, "mu length does not match the number of states");
  }
  if (!mu.allFinite() || (mu.array() <= 0.0).any() || std::abs(mu.sum() - 1.0) > 1e-10) {
    throw Error(ErrorCode::InvalidArgument, "mu must be a strictly positive probability vector");
  }
}

double cosine_value(const CosineFamily& fam, const Vector& x, std::size_t xi) {
  const auto& t = fam.terms[xi];
  return 0.5 * fam.a * x.squaredNorm() + t.c * std::cos(t.v.dot(x) + t.phi);
}

Matrix cosine_hessian(const CosineFamily& fam, const Vector& mu, const Vector& x) {
  const auto d = x.size();
  Matrix h = fam.a * Matrix::Identity(d, d);
  for (std::size_t xi = 0; xi < fam.terms.size(); ++xi) {
    const auto& t = fam.terms[xi];
    h -= mu[static_cast<Eigen::Index>(xi)] * t.c * std::cos(t.v.dot(x) + t.phi) * (t.v * t.v.transpose());
  }
  return h;
}

double cosine_mean_value(const CosineFamily& fam, const Vector& mu, const Vector& x) {
  double acc = 0.0;
  for (std::size_t xi = 0; xi < fam.terms.size(); ++xi) {
    acc += mu[static_cast<Eigen::Index>(xi)] * cosine_value(fam, x, xi);
  }
  return acc;
}

Vector cosine_mean_gradient(const CosineFamily& fam, const Vector& mu, const Vector& x) {
  Vector g = Vector::Zero(x.size());
  for (std::size_t xi = 0; xi < fam.terms.size(); ++xi) {
    const auto& t = fam.terms[xi];
    g += mu[static_cast<Eigen::Index>(xi)] * (fam.a * x - t.c * std::sin(t.v.dot(x) + t.phi) * t.v);
  }
  return g;
}

// Radius of the ball that must contain every global minimiser:
// f(x) >= a/2 ||x||^2 - sum mu|c| and f(0) <= sum mu|c|.
double minimiser_radius(const CosineFamily& fam, const Vector& mu) {
  double amplitude = 0.0;
  for (std::size_t xi = 0; xi < fam.terms.size(); ++xi) {
    amplitude += mu[static_cast<Eigen::Index>(xi)] * std::abs(fam.terms[xi].c);
  }
  return 2.0 * std::sqrt(amplitude / fam.a) + 1e-6;
}

// Damped Newton with a gradient-step fallback, for polishing grid minima.
Vector refine_minimum(const CosineFamily& fam, const Vector& mu, Vector x, double smoothness) {
  double fx = cosine_mean_value(fam, mu, x);
  for (int it = 0; it < 500; ++it) {
    const Vector g = cosine_mean_gradient(fam, mu, x);
    if (g.norm() < 1e-14) break;
    const Matrix h = cosine_hessian(fam, mu, x);
    Eigen::LLT<Matrix> llt(h);
    Vector step = (llt.info() == Eigen::Success) ? Vector(-llt.solve(g)) : Vector(-g / smoothness);
    double scale = 1.0;
    bool moved = false;
    for (int half = 0; half < 60; ++half) {
      const Vector trial = x + scale * step;
      const double ft = cosine_mean_value(fam, mu, trial);
      if (ft < fx || (ft == fx && half == 0 && step.norm() < 1e-15)) {
        x = trial;
        fx = ft;
        moved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!moved) break;
  }
  // Near the minimum f stops resolving progress; finish with plain Newton
  // steps judged by the gradient norm instead.
  for (int it = 0; it < 20; ++it) {
    const Vector g = cosine_mean_gradient(fam, mu, x);
    Eigen::LLT<Matrix> llt(cosine_hessian(fam, mu, x));
    if (llt.info() != Eigen::Success) break;
    const Vector trial = x - llt.solve(g);
    if (!(cosine_mean_gradient(fam, mu, trial).norm() < g.norm())) break;
    x = trial;
  }
  return x;
}

struct GridMinimum {
  Vector point;
  double value;
};

GridMinimum locate_global_minimum(const CosineFamily& fam, const Vector& mu, std::size_t dim,
                                  double smoothness) {
  const double radius = minimiser_radius(fam, mu);
  double max_freq = 0.0;
  for (const auto& t : fam.terms) max_freq = std::max(max_freq, t.v.norm());
  // Resolve each cosine period with at least 40 samples.
  const double wanted_spacing = max_freq > 0.0 ? (2.0 * std::numbers::pi / max_freq) / 40.0 : radius;
  const std::size_t floor_points = dim == 1 ? 200'001 : 1'001;
  const std::size_t cap_points = dim == 1 ? 2'000'001 : 3'001;
  const auto needed = static_cast<std::size_t>(std::ceil(2.0 * radius / wanted_spacing)) + 1;
  const std::size_t points = std::clamp(needed, floor_points, cap_points);
  const double spacing = 2.0 * radius / static_cast<double>(points - 1);

  constexpr std::size_t kCandidates = 8;
  std::vector<GridMinimum> best;
  auto consider = [&](const Vector& x) {
    const double fx = cosine_mean_value(fam, mu, x);
    if (best.size() < kCandidates || fx < best.back().value) {
      best.push_back({x, fx});
      std::sort(best.begin(), best.end(), [](const auto& l, const auto& r) { return l.value < r.value; });
      if (best.size() > kCandidates) best.pop_back();
    }
  };
  Vector x(static_cast<Eigen::Index>(dim));
  if (dim == 1) {
    for (std::size_t i = 0; i < points; ++i) {
      x[0] = -radius + spacing * static_cast<double>(i);
      consider(x);
    }
  } else {
    for (std::size_t i = 0; i < points; ++i) {
      for (std::size_t j = 0; j < points; ++j) {
        x[0] = -radius + spacing * static_cast<double>(i);
        x[1] = -radius + spacing * static_cast<double>(j);
        consider(x);
      }
    }
  }
  GridMinimum result{best.front().point, best.front().value};
  for (const auto& cand : best) {
    const Vector refined = refine_minimum(fam, mu, cand.point, smoothness);
    const double fr = cosine_mean_value(fam, mu, refined);
    if (fr < result.value) result = {refined, fr};
  }
  return result;
}

}  // namespace

SampledObjective::SampledObjective(Regime regime, Vector mu, Data data)
    : regime_(regime), mu_(std::move(mu)), data_(std::move(data)) {
  std::visit(
      Overloaded{
          [&](QuadraticFamily& fam) {
            check_mu(mu_, fam.a.size());
            if (fam.b.size() != fam.a.size()) throw Error(ErrorCode::DimensionMismatch, "A and b counts differ");
            dim_ = static_cast<std::size_t>(fam.a.front().rows());
            const auto d = static_cast<Eigen::Index>(dim_);
            if (dim_ == 0) throw Error(ErrorCode::InvalidArgument, "dimension must be positive");
            fam.mean_a = Matrix::Zero(d, d);
            fam.mean_b = Vector::Zero(d);
            for (std::size_t xi = 0; xi < fam.a.size(); ++xi) {
              const auto& a = fam.a[xi];
              if (a.rows() != d || a.cols() != d || fam.b[xi].size() != d) {
                throw Error(ErrorCode::DimensionMismatch, "per-state quadratic has the wrong shape");
              }
              if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff())) {
                throw Error(ErrorCode::InvalidArgument, "per-state Hessians must be symmetric");
              }
              fam.mean_a += mu_[static_cast<Eigen::Index>(xi)] * a;
              fam.mean_b += mu_[static_cast<Eigen::Index>(xi)] * fam.b[xi];
              growth_ = std::max({growth_, spectral_norm(a), fam.b[xi].norm()});
            }
            Eigen::SelfAdjointEigenSolver<Matrix> eig(fam.mean_a);
            const double lo = eig.eigenvalues().minCoeff();
            if (lo <= 1e-8) throw Error(ErrorCode::DegenerateSpectrum, "mean Hessian is not positive definite");
            sigma_ = lo;
            smoothness_ = eig.eigenvalues().maxCoeff();
            fam.minimiser = fam.mean_a.ldlt().solve(fam.mean_b);
            f_star_ = -0.5 * fam.mean_b.dot(fam.minimiser);
            opt_kind_ = OptSetKind::Point;
          },
          [&](LeastSquaresFamily& fam) {
            check_mu(mu_, fam.a.size());
            if (fam.b.size() != fam.a.size()) throw Error(ErrorCode::DimensionMismatch, "A and b counts differ");
            dim_ = static_cast<std::size_t>(fam.a.front().cols());
            const auto d = static_cast<Eigen::Index>(dim_);
            fam.gram = Matrix::Zero(d, d);
            fam.atb = Vector::Zero(d);
            fam.hessian.clear();
            fam.linear.clear();
            for (std::size_t xi = 0; xi < fam.a.size(); ++xi) {
              const auto& a = fam.a[xi];
              if (a.cols() != d || fam.b[xi].size() != a.rows()) {
                throw Error(ErrorCode::DimensionMismatch, "per-state least-squares block has the wrong shape");
              }
              const double weight = 1.0 / mu_[static_cast<Eigen::Index>(xi)];
              const Matrix ata = a.transpose() * a;
              const Vector atb = a.transpose() * fam.b[xi];
              fam.gram += ata;
              fam.atb += atb;
              fam.hessian.push_back(weight * ata);
              fam.linear.push_back(weight * atb);
              growth_ = std::max({growth_, spectral_norm(fam.hessian.back()), fam.linear.back().norm()});
            }
            Eigen::SelfAdjointEigenSolver<Matrix> eig(fam.gram);
            const Vector& lambda = eig.eigenvalues();
            const double top = lambda.maxCoeff();
            const double tol = 1e-9 * std::max(1.0, top);
            fam.rank = 0;
            double smallest = std::numeric_limits<double>::infinity();
            Vector inv = Vector::Zero(d);
            for (Eigen::Index i = 0; i < d; ++i) {
              if (lambda[i] > tol) {
                ++fam.rank;
                smallest = std::min(smallest, lambda[i]);
                inv[i] = 1.0 / lambda[i];
              }
            }
            if (fam.rank == 0) throw Error(ErrorCode::RankInfeasible, "A has rank zero");
            fam.gram_pinv = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
            fam.min_norm_solution = fam.gram_pinv * fam.atb;
            double residual = 0.0;
            double b_norm = 0.0;
            for (std::size_t xi = 0; xi < fam.a.size(); ++xi) {
              residual += (fam.a[xi] * fam.min_norm_solution - fam.b[xi]).squaredNorm();
              b_norm += fam.b[xi].squaredNorm();
            }
            if (std::sqrt(residual) > 1e-8 * (1.0 + std::sqrt(b_norm))) {
              throw Error(ErrorCode::RankInfeasible, "b is not in the range of A");
            }
            sigma_ = smallest;
            smoothness_ = top;
            f_star_ = 0.0;
            opt_kind_ = fam.rank < dim_ ? OptSetKind::Affine : OptSetKind::Point;
          },
          [&](CosineFamily& fam) {
            check_mu(mu_, fam.terms.size());
            if (!(fam.a > 0.0)) throw Error(ErrorCode::InvalidArgument, "quadratic weight a must be positive");
            dim_ = static_cast<std::size_t>(fam.terms.front().v.size());
            if (dim_ == 0) throw Error(ErrorCode::InvalidArgument, "dimension must be positive");
            growth_ = fam.a;
            smoothness_ = fam.a;
            for (std::size_t xi = 0; xi < fam.terms.size(); ++xi) {
              const auto& t = fam.terms[xi];
              if (static_cast<std::size_t>(t.v.size()) != dim_) {
                throw Error(ErrorCode::DimensionMismatch, "cosine frequency vectors differ in length");
              }
              growth_ = std::max(growth_, std::abs(t.c) * t.v.norm());
              smoothness_ += mu_[static_cast<Eigen::Index>(xi)] * std::abs(t.c) * t.v.squaredNorm();
            }
            if (dim_ <= 2) {
              const auto found = locate_global_minimum(fam, mu_, dim_, smoothness_);
              fam.minimiser = found.point;
              f_star_ = found.value;
              opt_kind_ = OptSetKind::NumericLowerBound;
            } else {
              opt_kind_ = OptSetKind::Unavailable;
            }
          },
      },
      data_);
}

void SampledObjective::check_point(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != dim_) throw Error(ErrorCode::DimensionMismatch, "point has the wrong dimension");
  if (!x.allFinite()) throw Error(ErrorCode::NonFiniteInput, "point has non-finite coordinates");
}

void SampledObjective::grad_sample_into(const Vector& x, State xi, Vector& out) const {
  switch (data_.index()) {
    case 0: {
      const auto& fam = std::get<QuadraticFamily>(data_);
      out.noalias() = fam.a[xi] * x;
      out -= fam.b[xi];
      return;
    }
    case 1: {
      const auto& fam = std::get<LeastSquaresFamily>(data_);
      out.noalias() = fam.hessian[xi] * x;
      out -= fam.linear[xi];
      return;
    }
    default: {
      const auto& fam = std::get<CosineFamily>(data_);
      const auto& t = fam.terms[xi];
      const double s = t.c * std::sin(t.v.dot(x) + t.phi);
      out = fam.a * x - s * t.v;
      return;
    }
  }
}

Vector SampledObjective::grad_sample(const Vector& x, State xi) const {
  check_point(x);
  if (xi >= n_states()) throw Error(ErrorCode::InvalidState, "state out of range");
  Vector out(x.size());
  grad_sample_into(x, xi, out);
  return out;
}

double SampledObjective::sample_value(const Vector& x, State xi) const {
  check_point(x);
  if (xi >= n_states()) throw Error(ErrorCode::InvalidState, "state out of range");
  return std::visit(Overloaded{
                        [&](const QuadraticFamily& fam) {
                          return 0.5 * x.dot(fam.a[xi] * x) - fam.b[xi].dot(x);
                        },
                        [&](const LeastSquaresFamily& fam) {
                          return 0.5 * (fam.a[xi] * x - fam.b[xi]).squaredNorm() / mu_[xi];
                        },
                        [&](const CosineFamily& fam) { return cosine_value(fam, x, xi); },
                    },
                    data_);
}

Vector SampledObjective::mean_gradient(const Vector& x) const {
  check_point(x);
  Vector total = Vector::Zero(x.size());
  Vector sample(x.size());
  for (std::size_t xi = 0; xi < n_states(); ++xi) {
    grad_sample_into(x, static_cast<State>(xi), sample);
    total += mu_[static_cast<Eigen::Index>(xi)] * sample;
  }
  return total;
}

double SampledObjective::f_value(const Vector& x) const {
  double total = 0.0;
  for (std::size_t xi = 0; xi < n_states(); ++xi) {
    total += mu_[static_cast<Eigen::Index>(xi)] * sample_value(x, static_cast<State>(xi));
  }
  return total;
}

Vector SampledObjective::project_opt(const Vector& x) const {
  check_point(x);
  return std::visit(Overloaded{
                        [&](const QuadraticFamily& fam) -> Vector { return fam.minimiser; },
                        [&](const LeastSquaresFamily& fam) -> Vector {
                          const Vector grad = fam.gram * x - fam.atb;
                          return x - fam.gram_pinv * grad;
                        },
                        [&](const CosineFamily& fam) -> Vector {
                          if (!fam.minimiser) {
                            throw Error(ErrorCode::OptSetUnavailable, "no optimal set for nonconvex dim > 2");
                          }
                          return *fam.minimiser;
                        },
                    },
                    data_);
}

double SampledObjective::opt_max_norm_sq(double radius) const {
  switch (opt_kind_) {
    case OptSetKind::Unavailable:
      throw Error(ErrorCode::OptSetUnavailable, "no optimal set for nonconvex dim > 2");
    case OptSetKind::Affine: {
      if (!std::isfinite(radius)) throw Error(ErrorCode::OptSetUnbounded, "affine optimal set needs a finite slice radius");
      const auto& fam = std::get<LeastSquaresFamily>(data_);
      if (radius * radius < fam.min_norm_solution.squaredNorm()) {
        throw Error(ErrorCode::InvalidArgument, "slice radius does not reach the optimal set");
      }
      return radius * radius;
    }
    default: {
      const Vector origin = Vector::Zero(static_cast<Eigen::Index>(dim_));
      return project_opt(origin).squaredNorm();
    }
  }
}

Matrix SampledObjective::hessian(const Vector& x) const {
  check_point(x);
  return std::visit(Overloaded{
                        [&](const QuadraticFamily& fam) -> Matrix { return fam.mean_a; },
                        [&](const LeastSquaresFamily& fam) -> Matrix { return fam.gram; },
                        [&](const CosineFamily& fam) -> Matrix { return cosine_hessian(fam, mu_, x); },
                    },
                    data_);
}

SampledObjective strongly_convex_from(std::vector<Matrix> a, std::vector<Vector> b, const Vector& mu) {
  if (a.empty()) throw Error(ErrorCode::InvalidArgument, "at least one state is required");
  QuadraticFamily fam;
  fam.a = std::move(a);
  fam.b = std::move(b);
  return SampledObjective(Regime::StronglyConvex, mu, std::move(fam));
}

SampledObjective build_strongly_convex(std::size_t dim, std::size_t n_states, const Vector& mu,
                                       std::uint64_t seed, const StronglyConvexOptions& options) {
  if (dim == 0 || n_states == 0) throw Error(ErrorCode::InvalidArgument, "dim and n_states must be positive");
  check_mu(mu, n_states);
  if (!(options.eig_lo > 0.0 && options.eig_hi >= options.eig_lo)) {
    throw Error(ErrorCode::InvalidArgument, "need 0 < eig_lo <= eig_hi");
  }
  const auto d = static_cast<Eigen::Index>(dim);
  auto rng = Rng::stream(seed, "objective/strongly_convex");
  const Matrix q = random_orthogonal(rng, d);
  const Vector eig = spread_spectrum(rng, d, options.eig_lo, options.eig_hi);
  const Matrix mean_a = q * eig.asDiagonal() * q.transpose();
  const Vector mean_b = options.b_scale * random_unit(rng, d);

  std::vector<Matrix> perturb_a;
  std::vector<Vector> perturb_b;
  Matrix avg_a = Matrix::Zero(d, d);
  Vector avg_b = Vector::Zero(d);
  for (std::size_t xi = 0; xi < n_states; ++xi) {
    perturb_a.push_back(random_symmetric_unit(rng, d));
    perturb_b.push_back(random_unit(rng, d));
    avg_a += mu[static_cast<Eigen::Index>(xi)] * perturb_a.back();
    avg_b += mu[static_cast<Eigen::Index>(xi)] * perturb_b.back();
  }
  std::vector<Matrix> a;
  std::vector<Vector> b;
  for (std::size_t xi = 0; xi < n_states; ++xi) {
    Matrix ai = mean_a + options.heterogeneity * (perturb_a[xi] - avg_a);
    a.push_back(0.5 * (ai + ai.transpose()));
    b.push_back(mean_b + options.b_heterogeneity * (perturb_b[xi] - avg_b));
  }
  return strongly_convex_from(std::move(a), std::move(b), mu);
}

SampledObjective error_bound_from(const Matrix& a, const Vector& b, const std::vector<State>& row_state,
                                  const Vector& mu) {
  if (static_cast<std::size_t>(a.rows()) != row_state.size() || a.rows() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch, "rows of A, b and the row partition differ");
  }
  const auto n = static_cast<std::size_t>(mu.size());
  LeastSquaresFamily fam;
  for (std::size_t xi = 0; xi < n; ++xi) {
    std::vector<Eigen::Index> rows;
    for (std::size_t r = 0; r < row_state.size(); ++r) {
      if (row_state[r] >= n) throw Error(ErrorCode::InvalidState, "row assigned to an unknown state");
      if (row_state[r] == xi) rows.push_back(static_cast<Eigen::Index>(r));
    }
    Matrix block(static_cast<Eigen::Index>(rows.size()), a.cols());
    Vector rhs(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      block.row(static_cast<Eigen::Index>(i)) = a.row(rows[i]);
      rhs[static_cast<Eigen::Index>(i)] = b[rows[i]];
    }
    fam.a.push_back(std::move(block));
    fam.b.push_back(std::move(rhs));
  }
  return SampledObjective(Regime::ErrorBound, mu, std::move(fam));
}

SampledObjective build_error_bound(std::size_t dim, std::size_t rank, std::size_t n_states,
                                   const Vector& mu, std::uint64_t seed, const ErrorBoundOptions& options) {
  if (rank < 1 || rank >= dim) throw Error(ErrorCode::RankInfeasible, "need 1 <= rank < dim");
  if (n_states == 0) throw Error(ErrorCode::InvalidArgument, "n_states must be positive");
  check_mu(mu, n_states);
  if (!(options.eig_lo > 0.0 && options.eig_hi >= options.eig_lo)) {
    throw Error(ErrorCode::InvalidArgument, "need 0 < eig_lo <= eig_hi");
  }
  if (!(options.heterogeneity >= 0.0 && options.heterogeneity < 0.5)) {
    throw Error(ErrorCode::InvalidArgument, "heterogeneity must lie in [0, 0.5)");
  }
  const auto d = static_cast<Eigen::Index>(dim);
  const auto r = static_cast<Eigen::Index>(rank);
  auto rng = Rng::stream(seed, "objective/error_bound");
  const Matrix basis = random_orthogonal(rng, d).leftCols(r);
  const Vector eig = spread_spectrum(rng, r, options.eig_lo, options.eig_hi);
  const Vector root = eig.cwiseSqrt();
  const Vector planted = options.solution_scale * random_unit(rng, d);

  // Per-state Gram weights W_xi = D^{1/2} (I + h S_xi) D^{1/2} with sum mu S = 0,
  // so that sum_xi A_xi^T A_xi = basis diag(eig) basis^T exactly.
  std::vector<Matrix> perturb;
  Matrix avg = Matrix::Zero(r, r);
  for (std::size_t xi = 0; xi < n_states; ++xi) {
    perturb.push_back(random_symmetric_unit(rng, r));
    avg += mu[static_cast<Eigen::Index>(xi)] * perturb.back();
  }
  LeastSquaresFamily fam;
  for (std::size_t xi = 0; xi < n_states; ++xi) {
    const Matrix inner = Matrix::Identity(r, r) + options.heterogeneity * (perturb[xi] - avg);
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (inner + inner.transpose()));
    const Matrix inner_root = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                              es.eigenvectors().transpose();
    const double scale = std::sqrt(mu[static_cast<Eigen::Index>(xi)]);
    Matrix block = scale * inner_root * root.asDiagonal() * basis.transpose();
    Vector rhs = block * planted;
    fam.a.push_back(std::move(block));
    fam.b.push_back(std::move(rhs));
  }
  SampledObjective objective(Regime::ErrorBound, mu, std::move(fam));
  if (std::get<LeastSquaresFamily>(objective.data()).rank != rank) {
    throw Error(ErrorCode::RankInfeasible, "constructed matrix does not have the requested rank");
  }
  return objective;
}

SampledObjective nonconvex_from(double a, std::vector<CosineTerm> terms, const Vector& mu) {
  if (terms.empty()) throw Error(ErrorCode::InvalidArgument, "at least one state is required");
  CosineFamily fam;
  fam.a = a;
  fam.terms = std::move(terms);
  return SampledObjective(Regime::Nonconvex, mu, std::move(fam));
}

namespace {

double probe_curvature(const CosineFamily& fam, const Vector& mu, std::size_t dim, std::uint64_t seed,
                       std::size_t probes) {
  double min_freq = std::numeric_limits<double>::infinity();
  for (const auto& t : fam.terms) {
    if (t.v.norm() > 0.0) min_freq = std::min(min_freq, t.v.norm());
  }
  const double period = std::isfinite(min_freq) ? 2.0 * std::numbers::pi / min_freq : 1.0;
  const double radius = std::max(minimiser_radius(fam, mu), period);
  auto rng = Rng::stream(seed, "objective/nonconvex/probe");
  double lowest = std::numeric_limits<double>::infinity();
  Vector x(static_cast<Eigen::Index>(dim));
  for (std::size_t p = 0; p < probes; ++p) {
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = radius * (2.0 * rng.uniform() - 1.0);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cosine_hessian(fam, mu, x), Eigen::EigenvaluesOnly);
    lowest = std::min(lowest, eig.eigenvalues().minCoeff());
  }
  return lowest;
}

}  // namespace

double min_probed_curvature(const SampledObjective& objective, std::uint64_t seed, std::size_t probes) {
  const auto* fam = std::get_if<CosineFamily>(&objective.data());
  if (fam == nullptr) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(objective.hessian(Vector::Zero(static_cast<Eigen::Index>(objective.dim()))),
                                              Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
  }
  return probe_curvature(*fam, objective.mu(), objective.dim(), seed, probes);
}

SampledObjective build_nonconvex(std::size_t dim, std::size_t n_states, const Vector& mu, double a,
                                 std::uint64_t seed, const NonconvexOptions& options) {
  if (!(a > 0.0)) throw Error(ErrorCode::InvalidArgument, "a must be positive");
  if (dim == 0 || n_states == 0) throw Error(ErrorCode::InvalidArgument, "dim and n_states must be positive");
  check_mu(mu, n_states);
  const auto d = static_cast<Eigen::Index>(dim);
  for (int attempt = 0; attempt < 100; ++attempt) {
    auto rng = Rng::stream(seed, "objective/nonconvex/" + std::to_string(attempt));
    const Vector direction = random_unit(rng, d);
    const double phase = 2.0 * std::numbers::pi * rng.uniform();
    CosineFamily fam;
    fam.a = a;
    for (std::size_t xi = 0; xi < n_states; ++xi) {
      Vector jitter(d);
      for (Eigen::Index i = 0; i < d; ++i) jitter[i] = rng.normal();
      Vector v = direction + options.heterogeneity * jitter;
      if (v.norm() < 1e-12) v = direction;
      CosineTerm term;
      term.v = options.v_scale * v.normalized();
      term.c = options.c_scale * std::abs(1.0 + options.heterogeneity * rng.normal());
      term.phi = phase + options.heterogeneity * std::numbers::pi * rng.normal();
      fam.terms.push_back(std::move(term));
    }
    if (probe_curvature(fam, mu, dim, derive_seed(seed, std::to_string(attempt)), 1000) < -1e-9) {
      return SampledObjective(Regime::Nonconvex, mu, std::move(fam));
    }
  }
  throw Error(ErrorCode::ConvexityNotBroken, "no draw produced a negative Hessian eigenvalue");
}

}  // namespace markov_sgd
