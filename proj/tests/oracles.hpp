#pragma once

// Generative simulation oracles for the gamma-mixed Poisson model and the
// lognormal ideation model.  These deliberately avoid the closed forms under
// test: every estimate comes from drawing R (and ages) and counting.

#include <algorithm>
#include <cmath>
#include <vector>

#include "frailmeta/rng.hpp"
#include "frailmeta/window.hpp"

namespace oracle {

struct mc_estimate {
  double value = 0.0;
  double se = 0.0;
  long n = 0;  // draws behind the estimate (accepted draws for conditionals)
};

inline mc_estimate from_binary(long hits, long n) {
  const double p = static_cast<double>(hits) / static_cast<double>(n);
  return {p, std::sqrt(std::max(p * (1.0 - p), 1e-12) / n), n};
}

inline mc_estimate from_samples(const std::vector<double>& xs) {
  const long n = static_cast<long>(xs.size());
  double m = 0.0;
  for (double x : xs) m += x;
  m /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / std::max<long>(1, n - 1));
  return {m, sd / std::sqrt(static_cast<double>(n)), n};
}

// Optional random "lifetime" length; fixed when sd <= 0.
struct window_model {
  double fixed = 1.0;
  bool lifetime = false;
  double mu = 0.0, sigma = 1.0, lo = 0.0, hi = 1.0;  // unconditional truncnorm

  static window_model from_profile_fixed(double years) {
    window_model w;
    w.fixed = years;
    return w;
  }
  static window_model from_lifetime(const frailmeta::lifetime_window& lw) {
    const frailmeta::trunc_fit cal =
        frailmeta::exposure_profile::from_lifetime(lw).calibration();
    window_model w;
    w.lifetime = true;
    w.mu = cal.mu;
    w.sigma = cal.sigma;
    w.lo = lw.lower();
    w.hi = lw.upper();
    return w;
  }
  double draw(frailmeta::rng& g) const {
    return lifetime ? g.truncated_normal(mu, sigma, lo, hi) : fixed;
  }
};

inline mc_estimate sim_prob_positive(double alpha, double lambda,
                                     const window_model& win, long draws,
                                     std::uint64_t seed) {
  frailmeta::rng g(seed);
  long hits = 0;
  for (long i = 0; i < draws; ++i) {
    const double r = g.gamma(alpha, 1.0 / alpha);
    if (g.poisson(r * lambda * win.draw(g)) > 0) ++hits;
  }
  return from_binary(hits, draws);
}

inline mc_estimate sim_prob_count(double alpha, double exposure, long k,
                                  long draws, std::uint64_t seed) {
  frailmeta::rng g(seed);
  long hits = 0;
  for (long i = 0; i < draws; ++i) {
    const double r = g.gamma(alpha, 1.0 / alpha);
    if (g.poisson(r * exposure) == k) ++hits;
  }
  return from_binary(hits, draws);
}

inline mc_estimate sim_weighted_moment(double alpha, double s, unsigned k,
                                       long draws, std::uint64_t seed) {
  frailmeta::rng g(seed);
  std::vector<double> xs(draws);
  for (long i = 0; i < draws; ++i) {
    const double r = g.gamma(alpha, 1.0 / alpha);
    xs[i] = std::pow(r, static_cast<double>(k)) * std::exp(-s * r);
  }
  return from_samples(xs);
}

inline mc_estimate sim_joint_positive(double alpha, double e1, double e2,
                                      long draws, std::uint64_t seed) {
  frailmeta::rng g(seed);
  long hits = 0;
  for (long i = 0; i < draws; ++i) {
    const double r = g.gamma(alpha, 1.0 / alpha);
    if (g.poisson(r * e1) > 0 && g.poisson(r * e2) > 0) ++hits;
  }
  return from_binary(hits, draws);
}

// Pearson correlation of the two positivity indicators.
inline double sim_phi(double alpha, double e1, double e2, long draws,
                      std::uint64_t seed) {
  frailmeta::rng g(seed);
  long s1 = 0, s2 = 0, s12 = 0;
  for (long i = 0; i < draws; ++i) {
    const double r = g.gamma(alpha, 1.0 / alpha);
    const bool a = g.poisson(r * e1) > 0, b = g.poisson(r * e2) > 0;
    s1 += a;
    s2 += b;
    s12 += a && b;
  }
  const double q1 = double(s1) / draws, q2 = double(s2) / draws,
               q12 = double(s12) / draws;
  return (q12 - q1 * q2) / std::sqrt(q1 * (1 - q1) * q2 * (1 - q2));
}

// SD of the paired counterfactual difference 1_exp - 1_con (shared R).
inline double sim_sd_effect(double alpha, double e_exp, double e_con, long draws,
                            std::uint64_t seed) {
  frailmeta::rng g(seed);
  std::vector<double> xs(draws);
  for (long i = 0; i < draws; ++i) {
    const double r = g.gamma(alpha, 1.0 / alpha);
    const double d = (g.poisson(r * e_exp) > 0 ? 1.0 : 0.0) -
                     (g.poisson(r * e_con) > 0 ? 1.0 : 0.0);
    xs[i] = d;
  }
  const mc_estimate m = from_samples(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m.value) * (x - m.value);
  return std::sqrt(ss / (draws - 1.0));
}

// ---- criteria-variant conditionals -------------------------------------

inline mc_estimate sim_cond_ge2_given_ge1(double alpha, double lambda,
                                          const window_model& win, long draws,
                                          std::uint64_t seed) {
  frailmeta::rng g(seed);
  long ge1 = 0, ge2 = 0;
  for (long i = 0; i < draws; ++i) {
    const double r = g.gamma(alpha, 1.0 / alpha);
    const long n = g.poisson(r * lambda * win.draw(g));
    if (n >= 1) {
      ++ge1;
      if (n >= 2) ++ge2;
    }
  }
  return from_binary(ge2, ge1);
}

inline mc_estimate sim_flup_pos_given_base_pos(double alpha, double l1,
                                               const window_model& win, double l2,
                                               double t2, long draws,
                                               std::uint64_t seed) {
  frailmeta::rng g(seed);
  long base = 0, both = 0;
  for (long i = 0; i < draws; ++i) {
    const double r = g.gamma(alpha, 1.0 / alpha);
    if (g.poisson(r * l1 * win.draw(g)) > 0) {
      ++base;
      if (g.poisson(r * l2 * t2) > 0) ++both;
    }
  }
  return from_binary(both, base);
}

inline mc_estimate sim_zero_baseline_u2(double alpha, double l1,
                                        const window_model& win, double l2,
                                        double t2, long draws,
                                        std::uint64_t seed) {
  frailmeta::rng g(seed);
  long clean = 0, pos = 0;
  for (long i = 0; i < draws; ++i) {
    const double r = g.gamma(alpha, 1.0 / alpha);
    if (g.poisson(r * l1 * win.draw(g)) == 0) {
      ++clean;
      if (g.poisson(r * l2 * t2) > 0) ++pos;
    }
  }
  return from_binary(pos, clean);
}

inline mc_estimate sim_recent_given_lifetime(double alpha, double l1, double delta,
                                             const window_model& win, long draws,
                                             std::uint64_t seed) {
  frailmeta::rng g(seed);
  long life = 0, recent = 0;
  for (long i = 0; i < draws; ++i) {
    const double r = g.gamma(alpha, 1.0 / alpha);
    const double t = win.draw(g);
    const long m = g.poisson(r * l1 * delta);
    const long older = g.poisson(r * l1 * std::max(0.0, t - delta));
    if (m + older > 0) {
      ++life;
      if (m > 0) ++recent;
    }
  }
  return from_binary(recent, life);
}

inline mc_estimate sim_hazell_base(double alpha, double l1, double t, double delta,
                                   long draws, std::uint64_t seed) {
  frailmeta::rng g(seed);
  long hits = 0;
  for (long i = 0; i < draws; ++i) {
    const double r = g.gamma(alpha, 1.0 / alpha);
    const long m1 = g.poisson(r * l1 * (t - delta));
    const long m2 = g.poisson(r * l1 * delta);
    if (m1 + m2 >= 2 && m2 >= 1) ++hits;
  }
  return from_binary(hits, draws);
}

inline mc_estimate sim_hazell_flup(double alpha, double l1, double l2, double t,
                                   double delta, double t2, long draws,
                                   std::uint64_t seed) {
  frailmeta::rng g(seed);
  long cond = 0, pos = 0;
  for (long i = 0; i < draws; ++i) {
    const double r = g.gamma(alpha, 1.0 / alpha);
    const long m1 = g.poisson(r * l1 * (t - delta));
    const long m2 = g.poisson(r * l1 * delta);
    if (m1 + m2 >= 2 && m2 >= 1) {
      ++cond;
      if (g.poisson(r * l2 * t2) > 0) ++pos;
    }
  }
  return from_binary(pos, cond);
}

// "Event at enrollment" screens approximate the instant with a small window.
struct at_enrollment_sim {
  double delta_sim = 1e-3;
};

inline mc_estimate sim_wood_base_mean(double alpha, double l1, double t,
                                      double delta, long draws,
                                      std::uint64_t seed,
                                      at_enrollment_sim cfg = {}) {
  frailmeta::rng g(seed);
  std::vector<double> xs;
  for (long i = 0; i < draws; ++i) {
    const double r = g.gamma(alpha, 1.0 / alpha);
    const long mt = g.poisson(r * l1 * (t - delta));
    const long mp = g.poisson(r * l1 * (delta - cfg.delta_sim));
    const long md = g.poisson(r * l1 * cfg.delta_sim);
    if (mp >= 1 && md >= 1) xs.push_back(double(mt + mp + md));
  }
  return from_samples(xs);
}

inline mc_estimate sim_wood_flup_mean(double alpha, double l1, double delta,
                                      double l2, double t2, long draws,
                                      std::uint64_t seed,
                                      at_enrollment_sim cfg = {}) {
  frailmeta::rng g(seed);
  std::vector<double> xs;
  for (long i = 0; i < draws; ++i) {
    const double r = g.gamma(alpha, 1.0 / alpha);
    const long mp = g.poisson(r * l1 * (delta - cfg.delta_sim));
    const long md = g.poisson(r * l1 * cfg.delta_sim);
    if (mp >= 1 && md >= 1) xs.push_back(double(g.poisson(r * l2 * t2)));
  }
  return from_samples(xs);
}

inline mc_estimate sim_cottrell_ge3(double alpha, double l1, double t, long draws,
                                    std::uint64_t seed, at_enrollment_sim cfg = {}) {
  frailmeta::rng g(seed);
  long cond = 0, hits = 0;
  for (long i = 0; i < draws; ++i) {
    const double r = g.gamma(alpha, 1.0 / alpha);
    const long mp = g.poisson(r * l1 * (t - cfg.delta_sim));
    const long md = g.poisson(r * l1 * cfg.delta_sim);
    if (mp >= 1 && md >= 1) {
      ++cond;
      if (mp + md >= 3) ++hits;
    }
  }
  return from_binary(hits, cond);
}

inline mc_estimate sim_cottrell_flup(double alpha, double l1, double t, double l2,
                                     double t2, long draws, std::uint64_t seed,
                                     at_enrollment_sim cfg = {}) {
  frailmeta::rng g(seed);
  long cond = 0, hits = 0;
  for (long i = 0; i < draws; ++i) {
    const double r = g.gamma(alpha, 1.0 / alpha);
    const long mp = g.poisson(r * l1 * (t - cfg.delta_sim));
    const long md = g.poisson(r * l1 * cfg.delta_sim);
    if (mp >= 1 && md >= 1) {
      ++cond;
      if (g.poisson(r * l2 * t2) > 0) ++hits;
    }
  }
  return from_binary(hits, cond);
}

inline mc_estimate sim_donaldson_ge2(double alpha, double l1, double t, long draws,
                                     std::uint64_t seed, at_enrollment_sim cfg = {}) {
  frailmeta::rng g(seed);
  long cond = 0, hits = 0;
  for (long i = 0; i < draws; ++i) {
    const double r = g.gamma(alpha, 1.0 / alpha);
    const long mpre = g.poisson(r * l1 * (t - cfg.delta_sim));
    const long md = g.poisson(r * l1 * cfg.delta_sim);
    if (md >= 1) {
      ++cond;
      if (mpre + md >= 2) ++hits;
    }
  }
  return from_binary(hits, cond);
}

inline mc_estimate sim_donaldson_flup(double alpha, double l1, double l2, double t2,
                                      long draws, std::uint64_t seed,
                                      at_enrollment_sim cfg = {}) {
  frailmeta::rng g(seed);
  long cond = 0, hits = 0;
  for (long i = 0; i < draws; ++i) {
    const double r = g.gamma(alpha, 1.0 / alpha);
    if (g.poisson(r * l1 * cfg.delta_sim) >= 1) {
      ++cond;
      if (g.poisson(r * l2 * t2) > 0) ++hits;
    }
  }
  return from_binary(hits, cond);
}

struct rossouw_sim_result {
  mc_estimate first_recent;
  mc_estimate flup_pos;
};

inline rossouw_sim_result sim_rossouw(double alpha, double l1,
                                      const window_model& win, double d1,
                                      double d2, double l2, double t2, long draws,
                                      std::uint64_t seed) {
  frailmeta::rng g(seed);
  long cond = 0, first = 0, pos = 0;
  for (long i = 0; i < draws; ++i) {
    const double r = g.gamma(alpha, 1.0 / alpha);
    const double t = win.draw(g);
    const long m1 = g.poisson(r * l1 * std::max(0.0, t - d1));
    const long mmid = g.poisson(r * l1 * (d1 - d2));
    const long m2 = g.poisson(r * l1 * d2);
    (void)mmid;
    if (m2 >= 1) {
      ++cond;
      if (m1 == 0) ++first;
      if (g.poisson(r * l2 * t2) > 0) ++pos;
    }
  }
  rossouw_sim_result out;
  out.first_recent = from_binary(first, cond);
  out.flup_pos = from_binary(pos, cond);
  return out;
}

// Conditional counts under the Mehlum screen; returns the accepted totals.
inline std::vector<long> sim_mehlum_counts(double alpha, double l1,
                                           const window_model& win, double delta,
                                           long draws, std::uint64_t seed) {
  frailmeta::rng g(seed);
  std::vector<long> counts;
  for (long i = 0; i < draws; ++i) {
    const double r = g.gamma(alpha, 1.0 / alpha);
    const double t = win.draw(g);
    const long m1 = g.poisson(r * l1 * std::max(0.0, t - delta));
    const long m2 = g.poisson(r * l1 * delta);
    if (m1 + m2 >= 2 && m2 >= 1) counts.push_back(m1 + m2);
  }
  return counts;
}

inline mc_estimate sim_mehlum_flup_rate(double alpha, double l1, double l2,
                                        const window_model& win, double delta,
                                        double t2, long draws,
                                        std::uint64_t seed) {
  frailmeta::rng g(seed);
  std::vector<double> xs;
  for (long i = 0; i < draws; ++i) {
    const double r = g.gamma(alpha, 1.0 / alpha);
    const double t = win.draw(g);
    const long m1 = g.poisson(r * l1 * std::max(0.0, t - delta));
    const long m2 = g.poisson(r * l1 * delta);
    if (m1 + m2 >= 2 && m2 >= 1)
      xs.push_back(static_cast<double>(g.poisson(r * l2 * t2)) / t2);
  }
  return from_samples(xs);
}

inline mc_estimate sim_nr_relative_risk(double alpha, double mu_con,
                                        double mu_exp, long draws,
                                        std::uint64_t seed) {
  frailmeta::rng g(seed);
  std::vector<double> xs(draws);
  for (long i = 0; i < draws; ++i) {
    const double r = g.gamma(alpha, 1.0 / alpha);
    xs[i] = -std::expm1(-r * mu_exp) / -std::expm1(-r * mu_con);
  }
  return from_samples(xs);
}

// ---- lognormal ideation -------------------------------------------------

struct lognormal_draws {
  std::vector<double> pre, post;
};

inline lognormal_draws sim_lognormal_pair(double sigma, double mu_pre,
                                          double tau_pre, double mu_post,
                                          double tau_post, long draws,
                                          std::uint64_t seed) {
  frailmeta::rng g(seed);
  lognormal_draws out;
  out.pre.resize(draws);
  out.post.resize(draws);
  for (long i = 0; i < draws; ++i) {
    const double z = sigma * g.normal();
    out.pre[i] = std::exp(z + mu_pre + tau_pre * g.normal());
    out.post[i] = std::exp(z + mu_post + tau_post * g.normal());
  }
  return out;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const long n = static_cast<long>(a.size());
  double ma = 0, mb = 0;
  for (long i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double va = 0, vb = 0, cab = 0;
  for (long i = 0; i < n; ++i) {
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
    cab += (a[i] - ma) * (b[i] - mb);
  }
  return cab / std::sqrt(va * vb);
}

}  // namespace oracle
