#pragma once

#include <cmath>
#include <stdexcept>
#include <variant>
#include <vector>

#include "frailmeta/normal.hpp"
#include "frailmeta/optimize.hpp"
#include "frailmeta/quadrature.hpp"

namespace frailmeta {

// Observation window of known, fixed length.
struct fixed_window {
  double years;

  explicit fixed_window(double y) : years(y) {
    if (!(std::isfinite(y) && y >= 0.0))
      throw std::domain_error("fixed_window: length must be nonnegative");
  }
};

// "Lifetime since the age of risk" window: the subject's age at enrollment
// minus risk_onset_age, with age modelled as a truncated Gaussian fitted to
// the study's reported range, mean and SD.
struct lifetime_window {
  double min_age;
  double max_age;
  double mean_age;  // observed conditional mean
  double sd_age;    // observed conditional SD
  double risk_onset_age;

  lifetime_window(double min_a, double max_a, double mean_a, double sd_a,
                  double onset = 10.0)
      : min_age(min_a), max_age(max_a), mean_age(mean_a), sd_age(sd_a),
        risk_onset_age(onset) {
    if (!(onset <= min_a && min_a < max_a))
      throw std::domain_error("lifetime_window: need onset <= min_age < max_age");
    if (!(min_a <= mean_a && mean_a <= max_a))
      throw std::domain_error("lifetime_window: mean_age outside age range");
    if (!(sd_a > 0.0))
      throw std::domain_error("lifetime_window: sd_age must be positive");
  }

  double lower() const { return min_age - risk_onset_age; }  // sigma in years
  double upper() const { return max_age - risk_onset_age; }  // sigma + tau
};

using shb_window = std::variant<fixed_window, lifetime_window>;

struct trunc_moments_result {
  double mean;
  double sd;
};

// Mean and SD of N(mu, sigma^2) conditioned to (lower, upper), by
// Gauss-Legendre quadrature on the region that carries mass.  Exponents are
// rescaled by their maximum so far-off-interval mu stays finite.
inline trunc_moments_result truncated_moments(double mu, double sigma,
                                              double lower, double upper,
                                              std::size_t order = 64) {
  if (!(std::isfinite(mu) && std::isfinite(sigma) && sigma > 0.0) ||
      !(std::isfinite(lower) && std::isfinite(upper) && lower < upper))
    throw std::domain_error("truncated_moments: bad inputs");

  double a = std::max(lower, mu - 40.0 * sigma);
  double b = std::min(upper, mu + 40.0 * sigma);
  if (!(a < b)) {
    // all mass piled against one boundary; exponential-tail approximation
    const double c = (mu >= upper) ? upper : lower;
    const double beta = std::abs(mu - c) / (sigma * sigma);
    const double scale = std::min(1.0 / beta, 0.25 * (upper - lower));
    return {c + (mu >= upper ? -scale : scale), scale};
  }

  const quad_rule& r = gauss_legendre(order);
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  double emax = -1e300;
  std::vector<double> ex(order), xs(order);
  for (std::size_t i = 0; i < order; ++i) {
    const double x = mid + half * r.x[i];
    const double z = (x - mu) / sigma;
    xs[i] = x;
    ex[i] = -0.5 * z * z;
    if (ex[i] > emax) emax = ex[i];
  }
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < order; ++i) {
    const double wgt = r.w[i] * std::exp(ex[i] - emax);
    m0 += wgt;
    m1 += wgt * xs[i];
    m2 += wgt * xs[i] * xs[i];
  }
  const double mean = m1 / m0;
  const double var = std::max(0.0, m2 / m0 - mean * mean);
  return {mean, std::sqrt(var)};
}

struct trunc_fit {
  double mu = 0.0;
  double sigma = 0.0;
  double discrepancy = 0.0;  // squared moment mismatch at the solution
  bool clamped = false;      // target SD exceeded the uniform bound
};

// Recover unconditional (mu, sigma) from conditional moments on (lower,
// upper).  Simplex search from (target_mean, target_sd) with a damped
// least-squares polish; targets at the uniform SD bound fall into the flat
// solution family, targets beyond it are clamped to 0.995 of the bound.
inline trunc_fit invert_moments(double target_mean, double target_sd,
                                double lower, double upper) {
  if (!(lower < target_mean && target_mean < upper))
    throw std::domain_error("invert_moments: target_mean outside support");
  if (!(target_sd > 0.0))
    throw std::domain_error("invert_moments: target_sd must be positive");

  const double len = upper - lower;
  const double sd_uniform = len / std::sqrt(12.0);

  trunc_fit out;
  double want_sd = target_sd;
  if (target_sd > sd_uniform * (1.0 + 1e-9)) {
    want_sd = 0.995 * sd_uniform;
    out.clamped = true;
  } else if (target_sd >= sd_uniform * (1.0 - 1e-6)) {
    // flat family: any sufficiently large sigma reproduces uniform moments
    out.mu = target_mean;
    out.sigma = 2e3 * len;
    const trunc_moments_result got =
        truncated_moments(out.mu, out.sigma, lower, upper);
    const double dm = got.mean - target_mean, ds = got.sd - target_sd;
    out.discrepancy = dm * dm + ds * ds;
    return out;
  }

  auto resid = [&](const vecd& p) {
    const trunc_moments_result got =
        truncated_moments(p[0], std::exp(p[1]), lower, upper);
    return vecd{got.mean - target_mean, got.sd - want_sd};
  };
  auto objective = [&](const vecd& p) {
    const vecd r = resid(p);
    return r[0] * r[0] + r[1] * r[1];
  };

  vecd start{target_mean, std::log(want_sd)};
  nm_options nm;
  nm.max_iter = 500;
  nm.ftol = 1e-10;
  nm.initial_step = 0.25;
  nm_result coarse = nelder_mead(objective, start, nm);

  ls_options ls;
  ls.max_iter = 60;
  ls.sumsq_tol = 1e-28;
  ls_result fine = least_squares(resid, coarse.x, ls);

  const vecd& best = fine.sumsq <= coarse.fmin ? fine.x : coarse.x;
  out.mu = best[0];
  out.sigma = std::exp(best[1]);
  const trunc_moments_result got =
      truncated_moments(out.mu, out.sigma, lower, upper);
  const double dm = got.mean - target_mean, ds = got.sd - target_sd;
  out.discrepancy = dm * dm + ds * ds;
  return out;
}

// Precomputed expectation rule over a window: either a point mass at a fixed
// length or quadrature nodes against the fitted truncated-Gaussian density.
class exposure_profile {
 public:
  static exposure_profile from_fixed(double years) {
    exposure_profile p;
    p.fixed_ = true;
    p.len_ = years;
    return p;
  }

  static exposure_profile from_lifetime(const lifetime_window& win,
                                        std::size_t order = 64) {
    exposure_profile p;
    p.fixed_ = false;
    const double lo = win.lower(), hi = win.upper();
    const trunc_fit fit =
        invert_moments(win.mean_age - win.risk_onset_age, win.sd_age, lo, hi);
    p.fit_ = fit;
    const quad_rule& r = gauss_legendre(order);
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    p.t_.resize(order);
    p.w_.resize(order);
    double z = 0.0;
    for (std::size_t i = 0; i < order; ++i) {
      p.t_[i] = mid + half * r.x[i];
      p.w_[i] = r.w[i] * normal_pdf(p.t_[i], fit.mu, fit.sigma);
      z += p.w_[i];
    }
    for (double& w : p.w_) w /= z;  // density renormalized on the nodes
    return p;
  }

  static exposure_profile from_window(const shb_window& w,
                                      std::size_t order = 64) {
    if (std::holds_alternative<fixed_window>(w))
      return from_fixed(std::get<fixed_window>(w).years);
    return from_lifetime(std::get<lifetime_window>(w), order);
  }

  bool is_fixed() const { return fixed_; }
  double fixed_length() const { return len_; }
  const trunc_fit& calibration() const { return fit_; }

  template <typename F>
  double average(F&& f) const {
    if (fixed_) return f(len_);
    double s = 0.0;
    for (std::size_t i = 0; i < t_.size(); ++i) s += w_[i] * f(t_[i]);
    return s;
  }

  // Smallest window length with positive density (support minimum).
  double support_min() const { return fixed_ ? len_ : t_.front(); }

 private:
  bool fixed_ = true;
  double len_ = 0.0;
  trunc_fit fit_;
  std::vector<double> t_, w_;
};

template <typename F>
double expect_over_window(F&& f, const shb_window& w, std::size_t order = 64) {
  return exposure_profile::from_window(w, order).average(f);
}

}  // namespace frailmeta
