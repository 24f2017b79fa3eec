#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "frailmeta/frailty.hpp"
#include "frailmeta/window.hpp"

namespace frailmeta {

// (alpha/(alpha + s))^expo in log space.
inline double pow_ratio(double alpha, double s, double expo) {
  return std::exp(-expo * std::log1p(s / alpha));
}

// f_beta(s) = (alpha/(alpha + lambda1 s))^(alpha+beta).  Defined for
// s > -alpha/lambda1; f_beta(0) = 1.
inline double f_beta(double alpha, double lambda1, double beta, double s) {
  if (!(std::isfinite(alpha) && alpha > 0.0))
    throw std::domain_error("f_beta: alpha must be positive");
  if (lambda1 > 0.0 && !(s > -alpha / lambda1))
    throw std::domain_error("f_beta: s at or beyond the pole -alpha/lambda1");
  return std::exp(-(alpha + beta) * std::log1p(lambda1 * s / alpha));
}

// Conditional probability helpers below take the baseline span through an
// exposure_profile so "lifetime since age 10" windows average correctly:
// population conditionals are ratios of averaged joint and conditioning
// probabilities, which is what a generative simulation with random ages
// measures.

// Prob{N >= 2 | N >= 1} over the baseline window.
inline double cond_ge2_given_ge1(double alpha, double lambda1,
                                 const exposure_profile& base) {
  const double num = base.average([&](double t) {
    const double e = lambda1 * t;
    return prob_positive(alpha, e) - e * pow_ratio(alpha, e, alpha + 1.0);
  });
  const double den =
      base.average([&](double t) { return prob_positive(alpha, lambda1 * t); });
  if (!(den > 0.0))
    throw std::domain_error("cond_ge2_given_ge1: conditioning event has probability 0");
  return num / den;
}

// Prob{N2 > 0 | N1 > 0}: follow-up positivity given at least one baseline event.
inline double flup_pos_given_base_pos(double alpha, double lambda1,
                                      const exposure_profile& base,
                                      double lambda2, double t2) {
  const double e2 = lambda2 * t2;
  const double num = base.average([&](double t1) {
    const double e1 = lambda1 * t1;
    return zero_prob(alpha, e2) - zero_prob(alpha, e1 + e2);
  });
  const double den = base.average(
      [&](double t1) { return prob_positive(alpha, lambda1 * t1); });
  if (!(den > 0.0))
    throw std::domain_error("flup_pos_given_base_pos: P{N1 > 0} = 0");
  return 1.0 - num / den;
}

// u2 = Prob{N2 > 0 | N1 = 0}: follow-up positivity among subjects with a
// clean baseline.  Fixed-span closed form:
//   1 - ((alpha + e1)/(alpha + e1 + e2))^alpha.
inline double zero_baseline_u2(double alpha, double e1, double e2) {
  return -std::expm1(-alpha * std::log1p(e2 / (alpha + e1)));
}

inline double zero_baseline_u2(double alpha, double lambda1,
                               const exposure_profile& base, double lambda2,
                               double t2) {
  if (base.is_fixed())
    return zero_baseline_u2(alpha, lambda1 * base.fixed_length(), lambda2 * t2);
  const double e2 = lambda2 * t2;
  const double num = base.average([&](double t1) {
    const double e1 = lambda1 * t1;
    return zero_prob(alpha, e1) - zero_prob(alpha, e1 + e2);
  });
  const double den =
      base.average([&](double t1) { return zero_prob(alpha, lambda1 * t1); });
  return num / den;
}

// Prob{event in the last delta years | at least one event lifetime}.
inline double recent_given_lifetime(double alpha, double lambda1, double delta,
                                    const exposure_profile& lifetime) {
  if (delta > lifetime.support_min() * (1.0 + 1e-12))
    throw std::domain_error("recent_given_lifetime: delta exceeds the minimum lifetime");
  const double num = prob_positive(alpha, lambda1 * delta);
  const double den = lifetime.average(
      [&](double t) { return prob_positive(alpha, lambda1 * t); });
  if (!(den > 0.0))
    throw std::domain_error("recent_given_lifetime: P{lifetime event} = 0");
  return num / den;
}

// Prob{M1 + M2 > 1 and M2 > 0}: at least two events in (0, t], one of them
// in the final Delta years.
inline double hazell_base_prob(double alpha, double lambda1, double t,
                               double delta) {
  if (!(t > delta && delta > 0.0))
    throw std::domain_error("hazell_base_prob: need t > delta > 0");
  return 1.0 - zero_prob(alpha, lambda1 * delta) -
         lambda1 * delta * pow_ratio(alpha, lambda1 * t, alpha + 1.0);
}

// Prob{N > 0 | M1 + M2 > 1, M2 > 0}.
inline double hazell_flup_given_base(double alpha, double lambda1,
                                     double lambda2, double t, double delta,
                                     double t2) {
  const double den = hazell_base_prob(alpha, lambda1, t, delta);
  if (!(den > 0.0))
    throw std::domain_error("hazell_flup_given_base: conditioning probability 0");
  const double e2 = lambda2 * t2;
  if (e2 == 0.0) return 0.0;
  const double num = den - zero_prob(alpha, e2) +
                     zero_prob(alpha, lambda1 * delta + e2) +
                     lambda1 * delta * pow_ratio(alpha, lambda1 * t + e2, alpha + 1.0);
  return num / den;
}

// E[M | prior event in the last Delta years and an event at enrollment],
// where M counts all baseline events including the enrollment one:
//   lambda1 (alpha+1)/alpha * (t - u f2(Delta)) / (1 - f1(Delta)) + 1, u = t - Delta.
inline double wood_expected_baseline_count(double alpha, double lambda1,
                                           const exposure_profile& base,
                                           double delta) {
  const double fd1 = f_beta(alpha, lambda1, 1.0, delta);
  const double fd2 = f_beta(alpha, lambda1, 2.0, delta);
  const double den = 1.0 - fd1;
  if (!(den > 0.0))
    throw std::domain_error("wood_expected_baseline_count: degenerate conditioning");
  const double num = base.average([&](double t) {
    if (!(t > delta))
      throw std::domain_error("wood_expected_baseline_count: need t > delta");
    return lambda1 * (alpha + 1.0) / alpha * (t - (t - delta) * fd2);
  });
  return num / den + 1.0;
}

// E[N | same conditioning]: the frailty-selection inflation (alpha+1)/alpha
// applied to the unconditional follow-up mean.
inline double wood_flup_mean(double alpha, double lambda2, double t2) {
  return lambda2 * t2 * (alpha + 1.0) / alpha;
}

// Prob{M' + M > 2 | M' > 0, event at t}: a third event given the enrollment
// event and at least one prior event in (0, t).
inline double cottrell_ge3_given_two(double alpha, double lambda1,
                                     const exposure_profile& base) {
  const double num = base.average([&](double t) {
    const double lt = lambda1 * t;
    const double factor = (alpha + 2.0 * lt + lt * alpha) / (alpha + lt);
    return 1.0 - factor * pow_ratio(alpha, lt, alpha + 1.0);
  });
  const double den = base.average([&](double t) {
    return 1.0 - pow_ratio(alpha, lambda1 * t, alpha + 1.0);
  });
  if (!(den > 0.0))
    throw std::domain_error("cottrell_ge3_given_two: conditioning probability 0");
  return num / den;
}

// Prob{N > 0 | M' > 0, event at t}.  The series expansion gives
//   [1 - f1(t) - (a/(a+e2))^{a+1} + (a/(a+lambda1 t+e2))^{a+1}] / [1 - f1(t)];
// the published expanded display carries a typo in its denominator (the
// lambda2 T term does not belong there), which the homogeneous limit and the
// generative simulation both confirm.
inline double cottrell_flup_pos(double alpha, double lambda1,
                                const exposure_profile& base, double lambda2,
                                double t2) {
  const double e2 = lambda2 * t2;
  if (e2 == 0.0) return 0.0;
  const double num = base.average([&](double t) {
    const double lt = lambda1 * t;
    return 1.0 - pow_ratio(alpha, lt, alpha + 1.0) -
           pow_ratio(alpha, e2, alpha + 1.0) +
           pow_ratio(alpha, lt + e2, alpha + 1.0);
  });
  const double den = base.average([&](double t) {
    return 1.0 - pow_ratio(alpha, lambda1 * t, alpha + 1.0);
  });
  if (!(den > 0.0))
    throw std::domain_error("cottrell_flup_pos: conditioning probability 0");
  return num / den;
}

// Prob{at least one prior event | event at enrollment} = 1 - f1(t).
inline double donaldson_ge2_given_event_at_t(double alpha, double lambda1,
                                             const exposure_profile& base) {
  // the conditioning weight lambda1*delta*f1(delta') is the same for every t,
  // so the population value is a plain average
  return base.average([&](double t) {
    return 1.0 - pow_ratio(alpha, lambda1 * t, alpha + 1.0);
  });
}

// Prob{N > 0 | event at enrollment} = 1 - g1(0); size-biased selection makes
// this exceed the unconditional positivity for finite alpha.
inline double donaldson_flup_pos_given_event_at_t(double alpha, double lambda2,
                                                  double t2) {
  return 1.0 - pow_ratio(alpha, lambda2 * t2, alpha + 1.0);
}

struct rossouw_result {
  double p_first_recent;  // Prob{M1 = 0 | M2 > 0}
  double p_flup_pos;      // Prob{N > 0 | M2 > 0}
};

// Rossouw conditioning: an event in the final Delta2 years is the inclusion
// event; M1 counts events before t - Delta1.
inline rossouw_result rossouw_probs(double alpha, double lambda1,
                                    const exposure_profile& base, double delta1,
                                    double delta2, double lambda2, double t2) {
  if (!(delta1 > delta2 && delta2 > 0.0))
    throw std::domain_error("rossouw_probs: need t > delta1 > delta2 > 0");
  const double den = prob_positive(alpha, lambda1 * delta2);
  if (!(den > 0.0))
    throw std::domain_error("rossouw_probs: P{M2 > 0} = 0");

  const double joint_first = base.average([&](double t) {
    if (!(t > delta1))
      throw std::domain_error("rossouw_probs: need t > delta1");
    const double e_pre = lambda1 * (t - delta1);
    return zero_prob(alpha, e_pre) - zero_prob(alpha, e_pre + lambda1 * delta2);
  });

  const double e2 = lambda2 * t2, ed2 = lambda1 * delta2;
  const double joint_flup = 1.0 - zero_prob(alpha, ed2) - zero_prob(alpha, e2) +
                            zero_prob(alpha, ed2 + e2);

  return {joint_first / den, joint_flup / den};
}

// Conditional pmf of the total baseline count given the Mehlum screen
// (M1 + M2 > 1, M2 > 0), tabulated from q = 2 until the tail is below tol.
inline std::vector<double> mehlum_conditional_count_pmf(
    double alpha, double lambda1, const exposure_profile& base, double delta,
    double tol = 1e-9, unsigned q_max = 400) {
  const double den =
      base.average([&](double t) { return hazell_base_prob(alpha, lambda1, t, delta); });
  if (!(den > 0.0))
    throw std::domain_error("mehlum_conditional_count_pmf: conditioning probability 0");

  std::vector<double> pmf;
  double cum = 0.0;
  for (unsigned q = 2; q <= q_max; ++q) {
    const double joint = base.average([&](double t) {
      const double all = prob_count(alpha, lambda1 * t, q);
      // Prob{M1 = q, M2 = 0} = (lambda1 (t-delta))^q / q! * E[R^q e^{-lambda1 t R}]
      const double e_pre = lambda1 * (t - delta);
      const double clean =
          e_pre <= 0.0 ? 0.0
                       : std::exp(q * std::log(e_pre) -
                                  std::lgamma(static_cast<double>(q) + 1.0)) *
                             gamma_weighted_moment(alpha, lambda1 * t, q);
      return all - clean;
    });
    const double p = std::max(0.0, joint / den);
    pmf.push_back(p);
    cum += p;
    if (q > 4 && 1.0 - cum < tol) break;
  }
  return pmf;
}

// Continuous quantile of the conditional count pmf (support starts at 2);
// linear interpolation between adjacent integers.
inline double mehlum_count_quantile(const std::vector<double>& pmf, double p) {
  double cum = 0.0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    const double next = cum + pmf[i];
    if (p <= next || i + 1 == pmf.size()) {
      const double k = static_cast<double>(i + 2);
      if (pmf[i] <= 0.0) return k;
      return k - (next - p) / pmf[i];
    }
    cum = next;
  }
  return 2.0;
}

// E[N | M1 + M2 > 1, M2 > 0] / T: follow-up event rate per year under the
// Mehlum screen.
inline double mehlum_flup_rate(double alpha, double lambda1, double lambda2,
                               const exposure_profile& base, double delta,
                               double t2) {
  const double den =
      base.average([&](double t) { return hazell_base_prob(alpha, lambda1, t, delta); });
  if (!(den > 0.0))
    throw std::domain_error("mehlum_flup_rate: conditioning probability 0");
  const double num = base.average([&](double t) {
    const double lt = lambda1 * t;
    return 1.0 - pow_ratio(alpha, lambda1 * delta, alpha + 1.0) -
           lambda1 * delta * pow_ratio(alpha, lt, alpha + 1.0) * (alpha + 1.0) /
               (alpha + lt);
  });
  return lambda2 * num / den;
}

}  // namespace frailmeta
