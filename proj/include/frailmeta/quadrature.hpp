#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace frailmeta {

struct quad_rule {
  std::vector<double> x;  // nodes
  std::vector<double> w;  // weights
};

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on P_n.
inline quad_rule make_gauss_legendre(std::size_t n) {
  quad_rule r;
  r.x.resize(n);
  r.w.resize(n);
  const std::size_t m = (n + 1) / 2;
  for (std::size_t i = 0; i < m; ++i) {
    double z = std::cos(M_PI * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(n) + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    r.x[i] = -z;
    r.x[n - 1 - i] = z;
    r.w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    r.w[n - 1 - i] = r.w[i];
  }
  return r;
}

// Gauss-Hermite (physicists' weight e^{-x^2}) via Newton on the orthonormal
// recurrence; stable for n up to a few hundred.
inline quad_rule make_gauss_hermite(std::size_t n) {
  quad_rule r;
  r.x.resize(n);
  r.w.resize(n);
  const double pim4 = 0.7511255444649425;  // pi^{-1/4}
  const std::size_t m = (n + 1) / 2;
  double z = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * r.x[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * r.x[1];
    } else {
      z = 2.0 * z - r.x[i - 2];
    }
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = pim4, p1 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = z * std::sqrt(2.0 / (j + 1.0)) * p1 -
             std::sqrt(static_cast<double>(j) / (j + 1.0)) * p2;
      }
      pp = std::sqrt(2.0 * n) * p1;
      const double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-14) break;
    }
    r.x[i] = z;  // store the largest roots first, mirror below
    r.w[i] = 2.0 / (pp * pp);
  }
  // mirror into ascending order
  quad_rule out;
  out.x.resize(n);
  out.w.resize(n);
  for (std::size_t i = 0; i < m; ++i) {
    out.x[i] = -r.x[i];
    out.w[i] = r.w[i];
    out.x[n - 1 - i] = r.x[i];
    out.w[n - 1 - i] = r.w[i];
  }
  if (n % 2 == 1) out.x[n / 2] = 0.0;
  return out;
}

inline const quad_rule& gauss_legendre(std::size_t n) {
  static std::map<std::size_t, quad_rule> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, make_gauss_legendre(n)).first;
  return it->second;
}

inline const quad_rule& gauss_hermite(std::size_t n) {
  static std::map<std::size_t, quad_rule> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, make_gauss_hermite(n)).first;
  return it->second;
}

// Integrate f over [a, b] with an n-node Gauss-Legendre rule.
template <typename F>
double integrate_gl(F&& f, double a, double b, std::size_t n = 64) {
  const quad_rule& r = gauss_legendre(n);
  const double c = 0.5 * (b - a), mid = 0.5 * (a + b);
  double s = 0.0;
  for (std::size_t i = 0; i < r.x.size(); ++i) s += r.w[i] * f(mid + c * r.x[i]);
  return c * s;
}

// E[h(Z)] for Z ~ N(0, sigma^2) via Gauss-Hermite.
template <typename F>
double gaussian_expect(F&& h, double sigma, std::size_t n = 64) {
  const quad_rule& r = gauss_hermite(n);
  const double scale = 1.41421356237309504880 * sigma;
  double s = 0.0;
  for (std::size_t i = 0; i < r.x.size(); ++i) s += r.w[i] * h(scale * r.x[i]);
  return s * 0.56418958354775628695;  // 1/sqrt(pi)
}

struct adaptive_result {
  double value = 0.0;
  double error = 0.0;
  bool converged = false;
  std::size_t intervals = 0;
};

namespace detail {

// QUADPACK 15-point Gauss-Kronrod constants.
inline const double gk15_x[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline const double gk15_wk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline const double gk15_wg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename F>
void gk15(F&& f, double a, double b, double& val, double& err) {
  const double c = 0.5 * (b - a), mid = 0.5 * (a + b);
  double fv[15];
  for (int i = 0; i < 7; ++i) {
    const double dx = c * gk15_x[i];
    fv[i] = f(mid - dx);
    fv[14 - i] = f(mid + dx);
  }
  fv[7] = f(mid);

  double resk = gk15_wk[7] * fv[7], resg = gk15_wg[3] * fv[7];
  for (int i = 0; i < 7; ++i) {
    resk += gk15_wk[i] * (fv[i] + fv[14 - i]);
    if (i % 2 == 1) resg += gk15_wg[i / 2] * (fv[i] + fv[14 - i]);
  }
  val = resk * c;
  err = std::abs((resk - resg) * c);

  // QUADPACK-style estimate: scale by the integrand's roughness so nearly
  // singular segments do not report spuriously small errors.
  const double reskh = 0.5 * resk;
  double resasc = gk15_wk[7] * std::abs(fv[7] - reskh);
  for (int i = 0; i < 7; ++i)
    resasc += gk15_wk[i] *
              (std::abs(fv[i] - reskh) + std::abs(fv[14 - i] - reskh));
  resasc *= std::abs(c);
  if (resasc != 0.0 && err != 0.0)
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
}

}  // namespace detail

// Globally adaptive Gauss-Kronrod integration on [a, b].  Splits the segment
// with the largest error estimate until the total estimate meets the
// tolerance or the interval budget runs out.
template <typename F>
adaptive_result integrate_adaptive(F&& f, double a, double b, double rel_tol,
                                   double abs_tol = 0.0,
                                   std::size_t max_intervals = 512) {
  struct seg {
    double a, b, val, err;
  };
  std::vector<seg> segs;
  seg s0{a, b, 0.0, 0.0};
  detail::gk15(f, a, b, s0.val, s0.err);
  segs.push_back(s0);

  adaptive_result res;
  while (true) {
    double total = 0.0, errsum = 0.0;
    std::size_t worst = 0;
    for (std::size_t i = 0; i < segs.size(); ++i) {
      total += segs[i].val;
      errsum += segs[i].err;
      if (segs[i].err > segs[worst].err) worst = i;
    }
    res.value = total;
    res.error = errsum;
    res.intervals = segs.size();
    const double tol = std::max(abs_tol, rel_tol * std::abs(total));
    if (errsum <= tol) {
      res.converged = true;
      return res;
    }
    if (segs.size() >= max_intervals) {
      res.converged = false;
      return res;
    }
    seg w = segs[worst];
    const double m = 0.5 * (w.a + w.b);
    if (!(m > w.a && m < w.b)) {  // cannot subdivide further
      res.converged = false;
      return res;
    }
    seg l{w.a, m, 0.0, 0.0}, r{m, w.b, 0.0, 0.0};
    detail::gk15(f, l.a, l.b, l.val, l.err);
    detail::gk15(f, r.a, r.b, r.val, r.err);
    segs[worst] = l;
    segs.push_back(r);
  }
}

}  // namespace frailmeta
