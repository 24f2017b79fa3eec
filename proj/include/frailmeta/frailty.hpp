#pragma once

#include <cmath>
#include <stdexcept>

namespace frailmeta {

// Per-subject multiplicative risk factor R ~ Gamma(alpha, alpha).
// E R = 1, Var R = 1/alpha; small alpha means high heterogeneity.
struct frailty {
  double alpha;

  explicit frailty(double a) : alpha(a) {
    if (!(std::isfinite(a) && a > 0.0))
      throw std::domain_error("frailty: alpha must be positive and finite");
  }

  double variance() const { return 1.0 / alpha; }
};

// A Poisson rate observed over a span of time; only the product
// rate * length enters any formula.
struct rate_window {
  double rate;    // events per year
  double length;  // years

  rate_window(double r, double t) : rate(r), length(t) {
    if (!(std::isfinite(r) && r >= 0.0) || !(std::isfinite(t) && t >= 0.0))
      throw std::domain_error("rate_window: rate and length must be nonnegative");
  }

  double exposure() const { return rate * length; }
};

// Count model: given R, N is Poisson with mean R * rate * length.
struct count_law {
  frailty mix;
  rate_window window;

  double exposure() const { return window.exposure(); }
};

// (alpha/(alpha+s))^alpha, evaluated in log space.  Stable for alpha up to
// 1e6+ and for s down to 1e-10 (both occur in fitted studies).
inline double zero_prob(double alpha, double s) {
  if (!(std::isfinite(alpha) && alpha > 0.0) || !(std::isfinite(s) && s >= 0.0))
    throw std::domain_error("zero_prob: need alpha > 0, s >= 0");
  return std::exp(-alpha * std::log1p(s / alpha));
}

// Prob{N > 0} = 1 - (alpha/(alpha+lambda T))^alpha.
inline double prob_positive(double alpha, double exposure) {
  if (!(std::isfinite(alpha) && alpha > 0.0) ||
      !(std::isfinite(exposure) && exposure >= 0.0))
    throw std::domain_error("prob_positive: bad inputs");
  return -std::expm1(-alpha * std::log1p(exposure / alpha));
}

inline double prob_positive(const count_law& law) {
  return prob_positive(law.mix.alpha, law.exposure());
}

// E[R^k e^{-sR}] = alpha^alpha * alpha(alpha+1)...(alpha+k-1) / (alpha+s)^{alpha+k},
// via log-gamma so large k does not overflow.
inline double gamma_weighted_moment(double alpha, double s, unsigned k) {
  if (!(std::isfinite(alpha) && alpha > 0.0) || !(std::isfinite(s) && s >= 0.0))
    throw std::domain_error("gamma_weighted_moment: need alpha > 0, s >= 0");
  const double log_ratio = -alpha * std::log1p(s / alpha);  // log (a/(a+s))^a
  if (k == 0) return std::exp(log_ratio);
  const double rising = std::lgamma(alpha + k) - std::lgamma(alpha);
  return std::exp(log_ratio + rising - static_cast<double>(k) * std::log(alpha + s));
}

// Prob{N = k} = (lambda T)^k / k! * E[R^k e^{-lambda T R}].
inline double prob_count(double alpha, double exposure, unsigned k) {
  if (!(std::isfinite(alpha) && alpha > 0.0) ||
      !(std::isfinite(exposure) && exposure >= 0.0))
    throw std::domain_error("prob_count: bad inputs");
  if (exposure == 0.0) return k == 0 ? 1.0 : 0.0;
  if (k == 0) return zero_prob(alpha, exposure);
  const double log_pref =
      k * std::log(exposure) - std::lgamma(static_cast<double>(k) + 1.0);
  const double log_mom = -alpha * std::log1p(exposure / alpha) +
                         std::lgamma(alpha + k) - std::lgamma(alpha) -
                         k * std::log(alpha + exposure);
  return std::exp(log_pref + log_mom);
}

inline double prob_count(const count_law& law, unsigned k) {
  return prob_count(law.mix.alpha, law.exposure(), k);
}

// Prob{N1 > 0 and N2 > 0} for counts sharing one R over disjoint windows.
// q12 = q1 + q2 - p12 with p12 = Prob{N1 + N2 > 0}; written as
// q1 q2 + (f(e1+e2) - f(e1) f(e2)) which keeps q12 >= q1 q2 in floating point.
inline double joint_positive(double alpha, double e1, double e2) {
  const double f1 = zero_prob(alpha, e1);
  const double f2 = zero_prob(alpha, e2);
  const double f12 = zero_prob(alpha, e1 + e2);
  const double q1 = 1.0 - f1, q2 = 1.0 - f2;
  return q1 * q2 + (f12 - f1 * f2);
}

// Pearson correlation of two binary indicators from their marginals and
// joint probability (the phi coefficient).
inline double phi_correlation(double q1, double q2, double q12) {
  if (!(q1 > 0.0 && q1 < 1.0 && q2 > 0.0 && q2 < 1.0))
    throw std::domain_error("phi_correlation: marginals must lie strictly in (0,1)");
  const double lo = std::max(0.0, q1 + q2 - 1.0);
  const double hi = std::min(q1, q2);
  if (q12 < lo - 1e-12 || q12 > hi + 1e-12)
    throw std::domain_error("phi_correlation: q12 outside the Frechet bounds");
  const double r = (q12 - q1 * q2) / std::sqrt(q1 * (1.0 - q1) * q2 * (1.0 - q2));
  return std::min(1.0, std::max(-1.0, r));
}

struct sd_effect_result {
  double sd = 0.0;
  double rho = 0.0;        // counterfactual correlation of the two indicators
  bool degenerate = false; // a marginal collapsed to 0 or 1; rho treated as 0
};

// SD of the counterfactual effect 1_exp - 1_con when both arms share the
// subject's R and are conditionally independent.
inline sd_effect_result counterfactual_sd_effect(double alpha, double e_exp,
                                                 double e_con) {
  const double qe = prob_positive(alpha, e_exp);
  const double qc = prob_positive(alpha, e_con);
  const double ve = qe * (1.0 - qe), vc = qc * (1.0 - qc);

  sd_effect_result out;
  // wide enough to catch rates that collapse to the search floor (~1e-10)
  const double eps = 1e-9;
  if (qe < eps || qe > 1.0 - eps || qc < eps || qc > 1.0 - eps) {
    out.degenerate = true;
    out.rho = 0.0;
  } else {
    const double q12 = joint_positive(alpha, e_exp, e_con);
    out.rho = phi_correlation(qe, qc, q12);
  }
  const double var = ve + vc - 2.0 * std::sqrt(ve * vc) * out.rho;
  out.sd = std::sqrt(std::max(0.0, var));
  return out;
}

}  // namespace frailmeta
