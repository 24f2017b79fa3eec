#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "frailmeta/normal.hpp"
#include "frailmeta/optimize.hpp"
#include "frailmeta/quadrature.hpp"

namespace frailmeta {

// X_pre = exp(Z + W_pre), X_post = exp(Z + W_post) with a shared latent
// Z ~ N(0, sigma^2) and independent W ~ N(mu, tau^2) per condition.
// With two follow-up arms that is seven parameters.
struct lognormal_latent {
  struct cond {
    double mu = 0.0;
    double tau = 1.0;
  };
  double sigma = 1.0;
  cond pre, post_con, post_exp;
};

struct moment_pair {
  double mean;
  double variance;
};

inline moment_pair lognormal_moments(double mu, double tau, double sigma) {
  const double s2 = sigma * sigma + tau * tau;
  const double mean = std::exp(mu + 0.5 * s2);
  const double variance = std::exp(2.0 * mu + s2) * std::expm1(s2);
  return {mean, variance};
}

inline moment_pair lognormal_moments(const lognormal_latent& p,
                                     const lognormal_latent::cond& c) {
  return lognormal_moments(c.mu, c.tau, p.sigma);
}

// Corr(X_pre, X_post) from
//   E(X_pre X_post) = exp(mu_pre + mu_post + 2 sigma^2 + (tau_pre^2 + tau_post^2)/2).
inline double prepost_correlation(double sigma, const lognormal_latent::cond& pre,
                                  const lognormal_latent::cond& post) {
  const moment_pair a = lognormal_moments(pre.mu, pre.tau, sigma);
  const moment_pair b = lognormal_moments(post.mu, post.tau, sigma);
  const double cross =
      std::exp(pre.mu + post.mu + 2.0 * sigma * sigma +
               0.5 * (pre.tau * pre.tau + post.tau * post.tau));
  return (cross - a.mean * b.mean) / std::sqrt(a.variance * b.variance);
}

// E[X_pre^p X_post^q | X_pre > x] for p, q in {0, 1, 2}.  The outer integral
// over the shared latent runs against the exponentially tilted Gaussian
// (Gauss-Hermite after completing the square), the inner expectation is the
// closed-form zeta.
inline double truncated_cross_moment(const lognormal_latent& par,
                                     const lognormal_latent::cond& post,
                                     unsigned p, unsigned q, double x,
                                     std::size_t nodes = 64) {
  if (!(x > 0.0)) throw std::domain_error("truncated_cross_moment: need x > 0");
  if (p > 2 || q > 2)
    throw std::domain_error("truncated_cross_moment: p, q must be 0, 1 or 2");

  const double sigma = par.sigma;
  const double mu_pre = par.pre.mu, tau_pre = par.pre.tau;
  const double lx = std::log(x);

  const double tail = normal_sf(lx, mu_pre,
                                std::sqrt(sigma * sigma + tau_pre * tau_pre));
  if (tail < 1e-12)
    throw std::domain_error("truncated_cross_moment: conditioning event too extreme");

  const double pq = static_cast<double>(p + q);
  const double zeta_pref = std::exp(mu_pre * p + 0.5 * p * p * tau_pre * tau_pre);
  const double shift = pq * sigma * sigma;  // tilted-mean of Z under e^{(p+q)Z}

  const quad_rule& gh = gauss_hermite(nodes);
  double acc = 0.0;
  for (std::size_t i = 0; i < gh.x.size(); ++i) {
    const double z = shift + 1.41421356237309504880 * sigma * gh.x[i];
    acc += gh.w[i] * normal_sf(lx - z, mu_pre + p * tau_pre * tau_pre, tau_pre);
  }
  const double ez = acc * 0.56418958354775628695 * zeta_pref;  // E zeta under tilt

  const double pref = std::exp(q * post.mu +
                               0.5 * (pq * pq * sigma * sigma +
                                      q * q * post.tau * post.tau));
  return pref * ez / tail;
}

// Conditional mean/variance/correlation under the enrollment screen
// X_pre > x, assembled from the cross moments.
struct screened_moments {
  double mean_pre, var_pre;
  double mean_post, var_post;
  double corr;
};

inline screened_moments screened_prepost(const lognormal_latent& par,
                                         const lognormal_latent::cond& post,
                                         double x) {
  const double m10 = truncated_cross_moment(par, post, 1, 0, x);
  const double m20 = truncated_cross_moment(par, post, 2, 0, x);
  const double m01 = truncated_cross_moment(par, post, 0, 1, x);
  const double m02 = truncated_cross_moment(par, post, 0, 2, x);
  const double m11 = truncated_cross_moment(par, post, 1, 1, x);
  screened_moments out;
  out.mean_pre = m10;
  out.var_pre = std::max(0.0, m20 - m10 * m10);
  out.mean_post = m01;
  out.var_post = std::max(0.0, m02 - m01 * m01);
  out.corr = (m11 - m10 * m01) / std::sqrt(out.var_pre * out.var_post);
  return out;
}

struct ideation_spec {
  std::string study_id;
  double mean_pre = 0.0, sd_pre = 0.0;
  double mean_post_con = 0.0, sd_post_con = 0.0;
  double mean_post_exp = 0.0, sd_post_exp = 0.0;
  double threshold = 0.0;  // minimum pre score; 0 disables the screen
  double score_offset = 0.0;  // additive shift applied before the fit
  double r_hyp = 0.3;
  long n_con = 1, n_exp = 1;

  void validate() const {
    auto pos = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!pos(mean_pre) || !pos(sd_pre) || !pos(mean_post_con) ||
        !pos(sd_post_con) || !pos(mean_post_exp) || !pos(sd_post_exp))
      throw std::domain_error("ideation_spec: means and SDs must be positive");
    if (threshold < 0.0 || !std::isfinite(threshold))
      throw std::domain_error("ideation_spec: bad threshold");
    if (!(r_hyp > 0.0 && r_hyp < 1.0))
      throw std::domain_error("ideation_spec: r_hyp must lie in (0,1)");
    if (n_con < 1 || n_exp < 1)
      throw std::domain_error("ideation_spec: sample sizes must be >= 1");
  }
};

struct ideation_fit {
  lognormal_latent params;
  double residual = 0.0;
  bool converged = false;
  double cohen_d = 0.0;   // (mean_exp - mean_con)/sd of the counterfactual difference
  double sd_effect = 0.0;
  double rho_counterfactual = 0.0;
  double corr_check = 0.0;  // model pre/post-control correlation at the fit
  std::size_t starts_used = 0;
};

namespace detail {

inline lognormal_latent unpack_ideation(const vecd& x) {
  lognormal_latent p;
  p.sigma = std::exp(x[0]);
  p.pre = {x[1], std::exp(x[2])};
  p.post_con = {x[3], std::exp(x[4])};
  p.post_exp = {x[5], std::exp(x[6])};
  return p;
}

inline vecd ideation_residuals(const ideation_spec& s, const lognormal_latent& p) {
  auto rel = [](double model, double obs) { return (model - obs) / std::max(1.0, std::abs(obs)); };
  vecd r(7);
  if (s.threshold > 0.0) {
    const screened_moments con = screened_prepost(p, p.post_con, s.threshold);
    const screened_moments exp_arm = screened_prepost(p, p.post_exp, s.threshold);
    r[0] = rel(con.mean_pre, s.mean_pre);
    r[1] = rel(std::sqrt(con.var_pre), s.sd_pre);
    r[2] = rel(con.mean_post, s.mean_post_con);
    r[3] = rel(std::sqrt(con.var_post), s.sd_post_con);
    r[4] = rel(exp_arm.mean_post, s.mean_post_exp);
    r[5] = rel(std::sqrt(exp_arm.var_post), s.sd_post_exp);
    r[6] = con.corr - s.r_hyp;
  } else {
    const moment_pair pre = lognormal_moments(p, p.pre);
    const moment_pair pc = lognormal_moments(p, p.post_con);
    const moment_pair pe = lognormal_moments(p, p.post_exp);
    r[0] = rel(pre.mean, s.mean_pre);
    r[1] = rel(std::sqrt(pre.variance), s.sd_pre);
    r[2] = rel(pc.mean, s.mean_post_con);
    r[3] = rel(std::sqrt(pc.variance), s.sd_post_con);
    r[4] = rel(pe.mean, s.mean_post_exp);
    r[5] = rel(std::sqrt(pe.variance), s.sd_post_exp);
    r[6] = prepost_correlation(p.sigma, p.pre, p.post_con) - s.r_hyp;
  }
  return r;
}

// Single-condition lognormal start: sigma^2 + tau^2 = log(1 + v/m^2).
inline std::array<double, 2> lognormal_start(double mean, double sd) {
  const double s2 = std::log1p(sd * sd / (mean * mean));
  return {std::log(mean) - 0.5 * s2, s2};
}

}  // namespace detail

inline ideation_fit fit_ideation(const ideation_spec& spec) {
  spec.validate();

  auto resid = [&](const vecd& x) {
    return detail::ideation_residuals(spec, detail::unpack_ideation(x));
  };
  auto objective = [&](const vecd& x) {
    const vecd r = resid(x);
    double s = 0.0;
    for (double e : r) s += e * e;
    return s;
  };

  // moment-based start, sigma carved out of the pre variance by r_hyp
  const auto pre0 = detail::lognormal_start(spec.mean_pre, spec.sd_pre);
  const auto pc0 = detail::lognormal_start(spec.mean_post_con, spec.sd_post_con);
  const auto pe0 = detail::lognormal_start(spec.mean_post_exp, spec.sd_post_exp);
  const double sig2_0 = std::max(1e-4, 0.5 * spec.r_hyp * pre0[1]);
  auto tau0 = [&](double total) { return std::sqrt(std::max(1e-4, total - sig2_0)); };

  vecd base_start{0.5 * std::log(sig2_0), pre0[0], std::log(tau0(pre0[1])),
                  pc0[0],  std::log(tau0(pc0[1])),  pe0[0],
                  std::log(tau0(pe0[1]))};

  ideation_fit out;
  double best = std::numeric_limits<double>::infinity();
  vecd best_x;
  for (std::size_t s = 0; s < 6; ++s) {
    vecd start = base_start;
    if (s > 0)  // jitter later starts with a Halton offset
      for (std::size_t j = 0; j < start.size(); ++j)
        start[j] += 0.8 * (halton(s, j % 2 == 0 ? 2 : 3) - 0.5);
    nm_options nm;
    nm.max_iter = 600;
    nm.ftol = 1e-14;
    nm.initial_step = 0.3;
    const nm_result coarse = nelder_mead(objective, start, nm);
    ls_options ls;
    ls.max_iter = 120;
    ls.sumsq_tol = 1e-26;
    const ls_result fine = least_squares(resid, coarse.x, ls);
    const double got = std::min(fine.sumsq, coarse.fmin);
    const vecd& x = fine.sumsq <= coarse.fmin ? fine.x : coarse.x;
    ++out.starts_used;
    if (got < best) {
      best = got;
      best_x = x;
    }
    if (best < 1e-20) break;
  }
  if (best_x.empty()) throw std::runtime_error("fit_ideation: no start produced a fit");

  out.params = detail::unpack_ideation(best_x);
  out.residual = best;
  out.converged = best < 1e-10;

  const lognormal_latent& p = out.params;
  const moment_pair mc = lognormal_moments(p, p.post_con);
  const moment_pair me = lognormal_moments(p, p.post_exp);
  const double s2 = p.sigma * p.sigma;
  const double cov = std::exp(p.post_exp.mu + p.post_con.mu +
                              0.5 * (p.post_exp.tau * p.post_exp.tau +
                                     p.post_con.tau * p.post_con.tau)) *
                     (std::exp(2.0 * s2) - std::exp(s2));
  out.rho_counterfactual = cov / std::sqrt(me.variance * mc.variance);
  const double var_diff = std::max(0.0, me.variance + mc.variance - 2.0 * cov);
  out.sd_effect = std::sqrt(var_diff);
  out.cohen_d = out.sd_effect > 0.0 ? (me.mean - mc.mean) / out.sd_effect : 0.0;
  out.corr_check = prepost_correlation(p.sigma, p.pre, p.post_con);
  return out;
}

}  // namespace frailmeta
