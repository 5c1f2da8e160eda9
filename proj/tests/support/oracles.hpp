#pragma once

// Reference computations written without the library's code paths: plain
// loops over std::vector, cyclic Jacobi rotations, Gaussian elimination.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Grid = std::vector<std::vector<double>>;

inline Grid to_grid(const Eigen::MatrixXd& m) {
  Grid g(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) g[i][j] = m(i, j);
  return g;
}

inline Grid matmul(const Grid& a, const Grid& b) {
  const std::size_t n = a.size(), p = b.size(), q = b[0].size();
  Grid c(n, std::vector<double>(q, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < p; ++k)
      for (std::size_t j = 0; j < q; ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline Grid identity(std::size_t n) {
  Grid g(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) g[i][i] = 1.0;
  return g;
}

/// P^k by k plain multiplications.
inline Grid power(const Grid& p, std::size_t k) {
  Grid out = identity(p.size());
  for (std::size_t i = 0; i < k; ++i) out = matmul(out, p);
  return out;
}

inline double tv(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

/// Solves A x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> gauss_solve(Grid a, std::vector<double> b) {
  const std::size_t n = a.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    std::swap(b[col], b[piv]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
    x[i] = s / a[i][i];
  }
  return x;
}

/// mu (P - I) = 0 with the first equation replaced by sum(mu) = 1.
inline std::vector<double> stationary(const Grid& p) {
  const std::size_t n = p.size();
  Grid a(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i][j] = p[j][i] - (i == j ? 1.0 : 0.0);
  std::vector<double> b(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) a[0][j] = 1.0;
  b[0] = 1.0;
  return gauss_solve(a, b);
}

/// Smallest k with max_start TV(P^k(start,.), mu) <= alpha.
inline std::size_t mixing_time(const Grid& p, double alpha) {
  const auto mu = stationary(p);
  Grid pk = p;
  for (std::size_t k = 1; k < 100000; ++k) {
    double worst = 0.0;
    for (const auto& row : pk) worst = std::max(worst, tv(row, mu));
    if (worst <= alpha) return k;
    pk = matmul(pk, p);
  }
  return 0;
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
inline std::vector<double> jacobi_eigenvalues(const Eigen::MatrixXd& m) {
  Grid a = to_grid(m);
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
  std::sort(ev.begin(), ev.end());
  return ev;
}

/// Closed-form tau with the same upward tie-breaking.
inline std::size_t tau(double c, double alpha) {
  if (alpha >= 1.0) return 0;
  const double raw = c * std::log(1.0 / alpha);
  const double r = std::round(raw);
  if (std::abs(raw - r) <= 1e-9 * std::max(1.0, raw)) return static_cast<std::size_t>(r);
  return static_cast<std::size_t>(std::ceil(raw));
}

/// First k whose predicate holds on the whole run [k, k + run]. With
/// accept_tail, a streak still alive at `limit` also counts.
inline std::size_t first_run(const std::function<bool(std::size_t)>& ok, std::size_t run, std::size_t limit,
                             bool accept_tail = false) {
  std::size_t streak = 0;
  for (std::size_t k = 1; k <= limit; ++k) {
    streak = ok(k) ? streak + 1 : 0;
    if (streak == run + 1) return k - run;
  }
  return accept_tail && streak > 0 ? limit - streak + 1 : 0;
}

/// Minimum of a 1-D function on [lo, hi] by a grid followed by golden-section refinement.
inline std::pair<double, double> grid_minimum(const std::function<double(double)>& f, double lo, double hi,
                                              double step) {
  double best_x = lo, best_f = f(lo);
  for (double x = lo; x <= hi; x += step) {
    const double v = f(x);
    if (v < best_f) {
      best_f = v;
      best_x = x;
    }
  }
  double a = best_x - step, b = best_x + step;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int i = 0; i < 200; ++i) {
    const double c = b - g * (b - a), d = a + g * (b - a);
    if (f(c) < f(d)) b = d; else a = c;
  }
  const double x = 0.5 * (a + b);
  return {x, std::min(best_f, f(x))};
}

}  // namespace oracle
