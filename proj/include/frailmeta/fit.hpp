#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "frailmeta/criteria.hpp"
#include "frailmeta/frailty.hpp"
#include "frailmeta/optimize.hpp"
#include "frailmeta/quadrature.hpp"
#include "frailmeta/study.hpp"
#include "frailmeta/window.hpp"

namespace frailmeta {

struct model_params {
  double lambda = 0.0;
  double mu_con = 0.0;
  double mu_exp = 0.0;
  double alpha = 1.0;
};

// Correlation between the one-year baseline indicator and the one-year
// control follow-up indicator implied by the shared frailty.
inline double model_r(double lambda, double mu_con, double alpha) {
  const double q1 = prob_positive(alpha, lambda);
  const double q2 = prob_positive(alpha, mu_con);
  const double q12 = joint_positive(alpha, lambda, mu_con);
  return phi_correlation(q1, q2, q12);
}

struct fit_failure : std::runtime_error {
  fit_failure(const std::string& what, double best, solver_trace tr)
      : std::runtime_error(what), best_residual(best), trace(tr) {}
  double best_residual;
  solver_trace trace;
};

// The study-specific defect function: routes the four theoretical moments
// through the criteria variant and subtracts the observations.  Count-type
// observations (means, medians) enter relative to their magnitude so the
// residual norm stays comparable to the probability defects.
class equation_system {
 public:
  explicit equation_system(const study_spec& spec)
      : spec_(spec), base_(exposure_profile::from_window(spec.baseline_window)) {
    spec_.validate();
    has_base_eq_ = !spec_.criteria.pins_lambda() || base_observed();
  }

  const study_spec& spec() const { return spec_; }
  const exposure_profile& baseline_profile() const { return base_; }
  bool lambda_pinned() const { return spec_.criteria.pins_lambda(); }

  std::size_t size() const {
    std::size_t n = 3;  // flup_con, flup_exp, r
    if (has_base_eq_)
      n += spec_.criteria.tag == criteria_tag::median_iqr_baseline ? 3 : 1;
    return n;
  }

  vecd defects(const model_params& p) const {
    vecd d;
    d.reserve(size());
    const double a = p.alpha, l = p.lambda;
    const double ec = p.mu_con * spec_.flup_years_con;
    const double ee = p.mu_exp * spec_.flup_years_exp;
    auto rel = [](double model, double obs) {
      return (model - obs) / std::max(1.0, std::abs(obs));
    };

    switch (spec_.criteria.tag) {
      case criteria_tag::none: {
        if (has_base_eq_)
          d.push_back(base_.average([&](double t) {
            return prob_positive(a, l * t);
          }) - spec_.q_base);
        d.push_back(prob_positive(a, ec) - spec_.q_flup_con);
        d.push_back(prob_positive(a, ee) - spec_.q_flup_exp);
        break;
      }
      case criteria_tag::at_least_one_baseline: {
        if (has_base_eq_)
          d.push_back(cond_ge2_given_ge1(a, l, base_) - spec_.q_base);
        d.push_back(flup_pos_given_base_pos(a, l, base_, p.mu_con,
                                            spec_.flup_years_con) -
                    spec_.q_flup_con);
        d.push_back(flup_pos_given_base_pos(a, l, base_, p.mu_exp,
                                            spec_.flup_years_exp) -
                    spec_.q_flup_exp);
        break;
      }
      case criteria_tag::zero_baseline: {
        if (has_base_eq_)
          d.push_back(base_.average([&](double t) {
            return prob_positive(a, l * t);
          }) - spec_.q_base);
        d.push_back(zero_baseline_u2(a, l, base_, p.mu_con, spec_.flup_years_con) -
                    spec_.q_flup_con);
        d.push_back(zero_baseline_u2(a, l, base_, p.mu_exp, spec_.flup_years_exp) -
                    spec_.q_flup_exp);
        break;
      }
      case criteria_tag::recent_given_lifetime: {
        if (has_base_eq_)
          d.push_back(recent_given_lifetime(a, l, spec_.criteria.delta, base_) -
                      spec_.q_base);
        d.push_back(flup_pos_given_base_pos(a, l, base_, p.mu_con,
                                            spec_.flup_years_con) -
                    spec_.q_flup_con);
        d.push_back(flup_pos_given_base_pos(a, l, base_, p.mu_exp,
                                            spec_.flup_years_exp) -
                    spec_.q_flup_exp);
        break;
      }
      case criteria_tag::two_in_year_one_recent: {
        const double delta = spec_.criteria.delta;
        if (has_base_eq_)
          d.push_back(base_.average([&](double t) {
            return hazell_base_prob(a, l, t, delta);
          }) - spec_.q_base);
        auto flup = [&](double mu, double t2) {
          const double num = base_.average([&](double t) {
            return hazell_flup_given_base(a, l, mu, t, delta, t2) *
                   hazell_base_prob(a, l, t, delta);
          });
          const double den = base_.average(
              [&](double t) { return hazell_base_prob(a, l, t, delta); });
          return num / den;
        };
        d.push_back(flup(p.mu_con, spec_.flup_years_con) - spec_.q_flup_con);
        d.push_back(flup(p.mu_exp, spec_.flup_years_exp) - spec_.q_flup_exp);
        break;
      }
      case criteria_tag::event_at_enrollment_with_prior: {
        if (has_base_eq_)
          d.push_back(rel(
              wood_expected_baseline_count(a, l, base_, spec_.criteria.delta),
              spec_.aux.mean_base_count));
        d.push_back(rel(wood_flup_mean(a, p.mu_con, spec_.flup_years_con),
                        spec_.aux.mean_flup_con));
        d.push_back(rel(wood_flup_mean(a, p.mu_exp, spec_.flup_years_exp),
                        spec_.aux.mean_flup_exp));
        break;
      }
      case criteria_tag::event_at_enrollment: {
        if (has_base_eq_)
          d.push_back(donaldson_ge2_given_event_at_t(a, l, base_) - spec_.q_base);
        d.push_back(donaldson_flup_pos_given_event_at_t(a, p.mu_con,
                                                        spec_.flup_years_con) -
                    spec_.q_flup_con);
        d.push_back(donaldson_flup_pos_given_event_at_t(a, p.mu_exp,
                                                        spec_.flup_years_exp) -
                    spec_.q_flup_exp);
        break;
      }
      case criteria_tag::first_harm_recent: {
        const double d1 = spec_.criteria.delta1, d2 = spec_.criteria.delta2;
        const rossouw_result rc =
            rossouw_probs(a, l, base_, d1, d2, p.mu_con, spec_.flup_years_con);
        if (has_base_eq_) d.push_back(rc.p_first_recent - spec_.q_base);
        d.push_back(rc.p_flup_pos - spec_.q_flup_con);
        const rossouw_result re =
            rossouw_probs(a, l, base_, d1, d2, p.mu_exp, spec_.flup_years_exp);
        d.push_back(re.p_flup_pos - spec_.q_flup_exp);
        break;
      }
      case criteria_tag::median_iqr_baseline: {
        const double delta = spec_.criteria.delta;
        if (has_base_eq_) {
          const std::vector<double> pmf =
              mehlum_conditional_count_pmf(a, l, base_, delta);
          d.push_back(rel(mehlum_count_quantile(pmf, 0.5), spec_.aux.median_base));
          d.push_back(rel(mehlum_count_quantile(pmf, 0.25), spec_.aux.iqr_low));
          d.push_back(rel(mehlum_count_quantile(pmf, 0.75), spec_.aux.iqr_high));
        }
        d.push_back(rel(
            mehlum_flup_rate(a, l, p.mu_con, base_, delta, spec_.flup_years_con),
            spec_.aux.rate_flup_con));
        d.push_back(rel(
            mehlum_flup_rate(a, l, p.mu_exp, base_, delta, spec_.flup_years_exp),
            spec_.aux.rate_flup_exp));
        break;
      }
    }

    d.push_back(model_r(l, p.mu_con, a) - spec_.r_hyp);
    return d;
  }

 private:
  bool base_observed() const {
    switch (spec_.criteria.tag) {
      case criteria_tag::event_at_enrollment_with_prior:
        return !std::isnan(spec_.aux.mean_base_count);
      case criteria_tag::median_iqr_baseline:
        return !std::isnan(spec_.aux.median_base);
      default:
        return !std::isnan(spec_.q_base);
    }
  }

  study_spec spec_;
  exposure_profile base_;
  bool has_base_eq_ = true;
};

struct solve_options {
  std::size_t starts = 16;
  std::size_t nm_iterations = 400;
  std::size_t ls_iterations = 80;
  double converged_tol = 1e-10;  // sum of squared defects
  double failure_tol = 1e-2;
  double log_lo = std::log(1e-12);
  double log_hi = std::log(1e4);
};

namespace detail {

inline double clamp_log(double v, const solve_options& o) {
  return std::min(std::max(v, o.log_lo), o.log_hi);
}

}  // namespace detail

// Multi-start solve of the four-equations-in-four-unknowns system over
// log-parameterized (lambda, mu_con, mu_exp, alpha).  Starts come from a
// fixed Halton design on [1e-3, 10] per parameter, so the result is a pure
// function of the study descriptor.
inline fit_result solve_system(const study_spec& spec,
                               const solve_options& opt = {}) {
  const equation_system sys(spec);
  const bool pinned = sys.lambda_pinned();
  const std::size_t dim = pinned ? 3 : 4;

  auto unpack = [&](const vecd& x) {
    model_params p;
    std::size_t i = 0;
    p.lambda = pinned ? spec.criteria.default_rate
                      : std::exp(detail::clamp_log(x[i++], opt));
    p.mu_con = std::exp(detail::clamp_log(x[i++], opt));
    p.mu_exp = std::exp(detail::clamp_log(x[i++], opt));
    p.alpha = std::exp(detail::clamp_log(x[i++], opt));
    return p;
  };

  std::size_t evals = 0;
  auto resid = [&](const vecd& x) {
    ++evals;
    return sys.defects(unpack(x));
  };
  auto objective = [&](const vecd& x) {
    const vecd r = resid(x);
    double s = 0.0;
    for (double e : r) s += e * e;
    return s;
  };

  static const unsigned bases[4] = {2, 3, 5, 7};
  const double span_lo = std::log(1e-3), span_hi = std::log(10.0);

  double best = std::numeric_limits<double>::infinity();
  double worst = 0.0;
  vecd best_x;
  solver_trace trace;
  for (std::size_t s = 0; s < opt.starts; ++s) {
    vecd start(dim);
    for (std::size_t j = 0; j < dim; ++j)
      start[j] = span_lo + (span_hi - span_lo) * halton(s + 1, bases[j]);

    nm_options nm;
    nm.max_iter = opt.nm_iterations;
    nm.ftol = 1e-16;
    nm.initial_step = 0.7;
    const nm_result coarse = nelder_mead(objective, start, nm);
    ls_options ls;
    ls.max_iter = opt.ls_iterations;
    ls.sumsq_tol = 1e-26;
    const ls_result fine = least_squares(resid, coarse.x, ls);

    const double got = std::min(fine.sumsq, coarse.fmin);
    const vecd& x = fine.sumsq <= coarse.fmin ? fine.x : coarse.x;
    ++trace.starts;
    worst = std::max(worst, got);
    if (got < best) {
      best = got;
      best_x = x;
    }
    if (best < 1e-22) break;  // exact-fit regime reached
  }
  trace.evaluations = evals;
  trace.worst_start = worst;

  if (!(best < opt.failure_tol))
    throw fit_failure("solve_system: no start reduced the defect norm below "
                      "the failure threshold",
                      best, trace);

  fit_result out;
  const model_params p = unpack(best_x);
  out.lambda_hat = p.lambda;
  out.mu_con_hat = p.mu_con;
  out.mu_exp_hat = p.mu_exp;
  out.alpha_hat = p.alpha;
  out.residual = best;
  out.converged = best < opt.converged_tol;
  out.trace = trace;
  for (double v : best_x)
    if (v <= opt.log_lo + 1e-9 || v >= opt.log_hi - 1e-9) out.at_bound = true;
  return out;
}

struct annualized {
  double q_base;
  double q_flup_con;
  double q_flup_exp;
};

// One-year probabilities from the fitted rates (Q as opposed to q).
inline annualized annualize(double lambda, double mu_con, double mu_exp,
                            double alpha) {
  return {prob_positive(alpha, lambda), prob_positive(alpha, mu_con),
          prob_positive(alpha, mu_exp)};
}

inline annualized annualize(const fit_result& fit) {
  return annualize(fit.lambda_hat, fit.mu_con_hat, fit.mu_exp_hat, fit.alpha_hat);
}

// Cohen's d; negative means the experimental arm did better.
inline double cohen_d(double q_exp, double q_con, double sd_effect) {
  if (!(sd_effect > 0.0)) throw std::domain_error("cohen_d: sd_effect must be positive");
  return (q_exp - q_con) / sd_effect;
}

inline double marginal_rr(double q_exp, double q_con) {
  if (!(q_con > 0.0)) return kNaN;
  return q_exp / q_con;
}

// Neyman-Rubin relative risk: E over R of
//   [1 - e^{-R mu_exp}] / [1 - e^{-R mu_con}]  (one-year windows).
// Integrated against the Gamma(alpha, alpha) density by adaptive quadrature;
// empty (NA) when the error estimate exceeds 1e-3 of the value, which is
// what happens when alpha << 1 piles the density onto the s = 0 singularity.
inline std::optional<double> nr_relative_risk(double alpha, double mu_con,
                                              double mu_exp) {
  if (!(alpha > 0.0 && mu_con > 0.0 && mu_exp >= 0.0)) return std::nullopt;
  const double log_norm = alpha * std::log(alpha) - std::lgamma(alpha);
  auto integrand = [&](double s) {
    const double rr = -std::expm1(-s * mu_exp) / -std::expm1(-s * mu_con);
    const double log_dens = log_norm + (alpha - 1.0) * std::log(s) - alpha * s;
    return rr * std::exp(log_dens);
  };
  const double upper = std::max(10.0, 60.0 / alpha);
  const adaptive_result res =
      integrate_adaptive(integrand, 0.0, upper, 1e-6, 0.0, 100);
  if (!(res.error <= 1e-3 * std::abs(res.value))) return std::nullopt;
  return res.value;
}

// Fill the reported statistics on a solved fit.
inline fit_result effect_statistics(fit_result fit, const study_spec& spec) {
  const annualized q = annualize(fit);
  fit.q_base_annual = q.q_base;
  fit.q_flup_con_annual = q.q_flup_con;
  fit.q_flup_exp_annual = q.q_flup_exp;
  fit.r_check = model_r(fit.lambda_hat, fit.mu_con_hat, fit.alpha_hat);

  const sd_effect_result sd =
      counterfactual_sd_effect(fit.alpha_hat, fit.mu_exp_hat, fit.mu_con_hat);
  fit.sd_effect = sd.sd;
  fit.degenerate_sd = sd.degenerate;
  fit.cohen_d = sd.sd > 0.0 ? (q.q_flup_exp - q.q_flup_con) / sd.sd : kNaN;
  fit.mrr = marginal_rr(q.q_flup_exp, q.q_flup_con);
  fit.nrr = nr_relative_risk(fit.alpha_hat, fit.mu_con_hat, fit.mu_exp_hat);
  (void)spec;
  return fit;
}

inline fit_result fit_study(const study_spec& spec, const solve_options& opt = {}) {
  return effect_statistics(solve_system(spec, opt), spec);
}

}  // namespace frailmeta
