#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace frailmeta {

using vecd = std::vector<double>;

struct nm_options {
  double initial_step = 0.5;
  std::size_t max_iter = 500;
  double ftol = 1e-10;   // absolute spread of simplex values
  double xtol = 1e-12;   // simplex diameter
};

struct nm_result {
  vecd x;
  double fmin = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  bool converged = false;
};

// Nelder-Mead downhill simplex, standard coefficients.
template <typename F>
nm_result nelder_mead(F&& f, const vecd& x0, const nm_options& opt = {}) {
  const std::size_t n = x0.size();
  std::vector<vecd> pts(n + 1, x0);
  vecd fv(n + 1);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += opt.initial_step;
  for (std::size_t i = 0; i <= n; ++i) fv[i] = f(pts[i]);

  std::vector<std::size_t> ord(n + 1);
  nm_result res;
  for (res.iterations = 0; res.iterations < opt.max_iter; ++res.iterations) {
    std::iota(ord.begin(), ord.end(), std::size_t{0});
    std::sort(ord.begin(), ord.end(),
              [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t best = ord[0], worst = ord[n], second = ord[n - 1];

    double diam = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      diam = std::max(diam, std::abs(pts[worst][i] - pts[best][i]));
    if (fv[worst] - fv[best] < opt.ftol || diam < opt.xtol) {
      res.converged = true;
      break;
    }

    vecd centroid(n, 0.0);
    for (std::size_t k = 0; k <= n; ++k) {
      if (k == worst) continue;
      for (std::size_t i = 0; i < n; ++i) centroid[i] += pts[k][i];
    }
    for (double& c : centroid) c /= static_cast<double>(n);

    auto blend = [&](double t) {
      vecd p(n);
      for (std::size_t i = 0; i < n; ++i)
        p[i] = centroid[i] + t * (pts[worst][i] - centroid[i]);
      return p;
    };

    vecd xr = blend(-1.0);
    const double fr = f(xr);
    if (fr < fv[ord[0]]) {
      vecd xe = blend(-2.0);
      const double fe = f(xe);
      if (fe < fr) {
        pts[worst] = std::move(xe);
        fv[worst] = fe;
      } else {
        pts[worst] = std::move(xr);
        fv[worst] = fr;
      }
    } else if (fr < fv[second]) {
      pts[worst] = std::move(xr);
      fv[worst] = fr;
    } else {
      const bool outside = fr < fv[worst];
      vecd xc = blend(outside ? -0.5 : 0.5);
      const double fc = f(xc);
      if (fc < std::min(fr, fv[worst])) {
        pts[worst] = std::move(xc);
        fv[worst] = fc;
      } else {  // shrink toward best
        for (std::size_t k = 0; k <= n; ++k) {
          if (k == best) continue;
          for (std::size_t i = 0; i < n; ++i)
            pts[k][i] = pts[best][i] + 0.5 * (pts[k][i] - pts[best][i]);
          fv[k] = f(pts[k]);
        }
      }
    }
  }

  std::size_t ib = 0;
  for (std::size_t i = 1; i <= n; ++i)
    if (fv[i] < fv[ib]) ib = i;
  res.x = pts[ib];
  res.fmin = fv[ib];
  return res;
}

struct ls_options {
  std::size_t max_iter = 200;
  double sumsq_tol = 1e-24;
  double step_tol = 1e-14;
  double fd_step = 1e-6;
};

struct ls_result {
  vecd x;
  double sumsq = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  bool converged = false;
};

namespace detail {

// Solve A x = b for small dense systems, Gaussian elimination with partial
// pivoting.  A is n x n row-major and is destroyed.
inline bool solve_dense(std::vector<double>& A, vecd& b, std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(A[r * n + col]) > std::abs(A[piv * n + col])) piv = r;
    if (std::abs(A[piv * n + col]) < 1e-300) return false;
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(A[piv * n + c], A[col * n + c]);
      std::swap(b[piv], b[col]);
    }
    const double d = A[col * n + col];
    for (std::size_t r = col + 1; r < n; ++r) {
      const double m = A[r * n + col] / d;
      if (m == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) A[r * n + c] -= m * A[col * n + c];
      b[r] -= m * b[col];
    }
  }
  for (std::size_t ri = n; ri-- > 0;) {
    double s = b[ri];
    for (std::size_t c = ri + 1; c < n; ++c) s -= A[ri * n + c] * b[c];
    b[ri] = s / A[ri * n + ri];
  }
  return true;
}

}  // namespace detail

// Damped least squares (Levenberg-Marquardt) on a residual vector with a
// forward-difference Jacobian.  Minimizes sum of squared residuals.
template <typename F>
ls_result least_squares(F&& resid, const vecd& x0, const ls_options& opt = {}) {
  vecd x = x0;
  vecd r = resid(x);
  const std::size_t n = x.size(), m = r.size();
  auto sumsq = [](const vecd& v) {
    double s = 0.0;
    for (double e : v) s += e * e;
    return s;
  };
  double f = sumsq(r);
  double lambda = 1e-3;

  ls_result out;
  std::vector<double> J(m * n);
  for (out.iterations = 0; out.iterations < opt.max_iter; ++out.iterations) {
    if (f < opt.sumsq_tol) {
      out.converged = true;
      break;
    }
    // finite-difference Jacobian
    for (std::size_t j = 0; j < n; ++j) {
      const double h = opt.fd_step * std::max(1.0, std::abs(x[j]));
      vecd xp = x;
      xp[j] += h;
      vecd rp = resid(xp);
      for (std::size_t i = 0; i < m; ++i) J[i * n + j] = (rp[i] - r[i]) / h;
    }
    // normal equations with damping
    std::vector<double> A(n * n, 0.0);
    vecd g(n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t a = 0; a < n; ++a) {
        g[a] -= J[i * n + a] * r[i];
        for (std::size_t b = 0; b <= a; ++b) A[a * n + b] += J[i * n + a] * J[i * n + b];
      }
    }
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) A[a * n + b] = A[b * n + a];

    bool improved = false;
    for (int attempt = 0; attempt < 12 && !improved; ++attempt) {
      std::vector<double> Ad = A;
      vecd step = g;
      for (std::size_t a = 0; a < n; ++a) Ad[a * n + a] += lambda * (A[a * n + a] + 1e-12);
      if (!detail::solve_dense(Ad, step, n)) {
        lambda *= 10.0;
        continue;
      }
      vecd xn = x;
      double snorm = 0.0;
      for (std::size_t a = 0; a < n; ++a) {
        xn[a] += step[a];
        snorm = std::max(snorm, std::abs(step[a]));
      }
      vecd rn = resid(xn);
      const double fn = sumsq(rn);
      if (fn < f) {
        x = std::move(xn);
        r = std::move(rn);
        f = fn;
        lambda = std::max(lambda * 0.25, 1e-12);
        improved = true;
        if (snorm < opt.step_tol) {
          out.converged = true;
          out.x = x;
          out.sumsq = f;
          return out;
        }
      } else {
        lambda *= 8.0;
      }
    }
    if (!improved) break;  // stalled
  }
  out.x = std::move(x);
  out.sumsq = f;
  if (f < opt.sumsq_tol) out.converged = true;
  return out;
}

// Halton low-discrepancy sequence element (1-based index).
inline double halton(std::size_t index, unsigned base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * (index % base);
    index /= base;
  }
  return r;
}

}  // namespace frailmeta
