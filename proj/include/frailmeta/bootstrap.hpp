#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <thread>
#include <vector>

#include "frailmeta/fit.hpp"
#include "frailmeta/rng.hpp"
#include "frailmeta/study.hpp"

namespace frailmeta {

struct bootstrap_config {
  std::size_t replicates = 1000;
  std::uint64_t seed = 0;
  enum class policy { drop_and_count, abort_over_threshold };
  policy failure_policy = policy::drop_and_count;
  double max_failure_fraction = 0.2;
  std::size_t threads = 0;  // 0 = hardware concurrency
  double delta_sim = 1e-3;  // admission window for "at enrollment" screens, years
};

struct simulation_infeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

// Per-subject baseline window length in years.
inline double draw_window_years(const shb_window& w, rng& gen) {
  if (std::holds_alternative<fixed_window>(w))
    return std::get<fixed_window>(w).years;
  const lifetime_window& lw = std::get<lifetime_window>(w);
  const trunc_fit cal = exposure_profile::from_lifetime(lw).calibration();
  const double age =
      gen.truncated_normal(cal.mu, cal.sigma, lw.lower(), lw.upper());
  return age;
}

struct sim_subject {
  bool accepted = false;
  bool base_flag = false;   // variant-specific baseline indicator
  bool flup_pos = false;
  long base_count = 0;      // total baseline events (count variants)
  long flup_count = 0;
  bool screened_pos = false;  // zero-baseline bookkeeping
};

}  // namespace detail

// Forward simulation of one study at the fitted parameters: draw R per
// subject, draw the baseline window, generate Poisson counts and apply the
// inclusion screen by rejection so the synthetic sample honors the criteria.
// Emits observed summaries in the same shape as a real descriptor.
inline study_spec simulate_study(const model_params& p, const study_spec& spec,
                                 std::uint64_t seed, double delta_sim = 1e-3) {
  spec.validate();
  // calibrate the age model once; per-subject draws reuse it
  const bool lifetime = std::holds_alternative<lifetime_window>(spec.baseline_window);
  trunc_fit cal;
  double lo = 0.0, hi = 0.0;
  if (lifetime) {
    const lifetime_window& lw = std::get<lifetime_window>(spec.baseline_window);
    cal = exposure_profile::from_lifetime(lw).calibration();
    lo = lw.lower();
    hi = lw.upper();
  }

  rng gen(seed, 0x5b00);
  const criteria_tag tag = spec.criteria.tag;

  long attempts = 0, accepted_total = 0;
  long screened_total = 0, screened_positive = 0;

  auto draw_subject = [&](double mu, double t2) {
    detail::sim_subject s;
    while (!s.accepted) {
      ++attempts;
      if (attempts > 20000 && accepted_total < attempts / 10000)
        throw simulation_infeasible("simulate_study: acceptance rate below 1e-4");

      const double r = gen.gamma(p.alpha, 1.0 / p.alpha);
      const double t1 = lifetime
                            ? gen.truncated_normal(cal.mu, cal.sigma, lo, hi)
                            : std::get<fixed_window>(spec.baseline_window).years;

      switch (tag) {
        case criteria_tag::none: {
          const long n1 = gen.poisson(r * p.lambda * t1);
          s.accepted = true;
          s.base_flag = n1 > 0;
          break;
        }
        case criteria_tag::at_least_one_baseline: {
          const long n1 = gen.poisson(r * p.lambda * t1);
          ++screened_total;
          if (n1 < 1) continue;
          s.accepted = true;
          s.base_flag = n1 >= 2;
          break;
        }
        case criteria_tag::zero_baseline: {
          const long n1 = gen.poisson(r * p.lambda * t1);
          ++screened_total;
          if (n1 > 0) {
            ++screened_positive;
            continue;  // excluded for history
          }
          s.accepted = true;
          break;
        }
        case criteria_tag::recent_given_lifetime: {
          const double delta = spec.criteria.delta;
          const long recent = gen.poisson(r * p.lambda * delta);
          const long older = gen.poisson(r * p.lambda * std::max(0.0, t1 - delta));
          if (recent + older < 1) continue;
          s.accepted = true;
          s.base_flag = recent > 0;
          break;
        }
        case criteria_tag::two_in_year_one_recent:
        case criteria_tag::median_iqr_baseline: {
          const double delta = spec.criteria.delta;
          const long m1 = gen.poisson(r * p.lambda * std::max(0.0, t1 - delta));
          const long m2 = gen.poisson(r * p.lambda * delta);
          if (!(m1 + m2 >= 2 && m2 >= 1)) continue;
          s.accepted = true;
          s.base_count = m1 + m2;
          break;
        }
        case criteria_tag::event_at_enrollment_with_prior: {
          const double delta = spec.criteria.delta;
          const long mt = gen.poisson(r * p.lambda * std::max(0.0, t1 - delta));
          const long mp = gen.poisson(r * p.lambda * std::max(0.0, delta - delta_sim));
          const long md = gen.poisson(r * p.lambda * delta_sim);
          if (!(mp >= 1 && md >= 1)) continue;
          s.accepted = true;
          s.base_count = mt + mp + md;
          break;
        }
        case criteria_tag::event_at_enrollment: {
          const long mpre = gen.poisson(r * p.lambda * std::max(0.0, t1 - delta_sim));
          const long md = gen.poisson(r * p.lambda * delta_sim);
          if (md < 1) continue;
          s.accepted = true;
          s.base_flag = mpre + md >= 2;
          break;
        }
        case criteria_tag::first_harm_recent: {
          const double d1 = spec.criteria.delta1, d2 = spec.criteria.delta2;
          const long m1 = gen.poisson(r * p.lambda * std::max(0.0, t1 - d1));
          const long mmid = gen.poisson(r * p.lambda * std::max(0.0, d1 - d2));
          const long m2 = gen.poisson(r * p.lambda * d2);
          (void)mmid;
          if (m2 < 1) continue;
          s.accepted = true;
          s.base_flag = m1 == 0;
          break;
        }
      }
      if (s.accepted) {
        ++accepted_total;
        s.flup_count = gen.poisson(r * mu * t2);
        s.flup_pos = s.flup_count > 0;
      }
    }
    return s;
  };

  std::vector<detail::sim_subject> con, exp_arm;
  con.reserve(spec.n_con);
  exp_arm.reserve(spec.n_exp);
  for (long i = 0; i < spec.n_con; ++i)
    con.push_back(draw_subject(p.mu_con, spec.flup_years_con));
  for (long i = 0; i < spec.n_exp; ++i)
    exp_arm.push_back(draw_subject(p.mu_exp, spec.flup_years_exp));

  auto frac = [](const std::vector<detail::sim_subject>& v, auto pred) {
    long c = 0;
    for (const auto& s : v) c += pred(s) ? 1 : 0;
    return static_cast<double>(c) / static_cast<double>(v.size());
  };
  auto flup = [&](const std::vector<detail::sim_subject>& v) {
    return frac(v, [](const detail::sim_subject& s) { return s.flup_pos; });
  };

  study_spec out = spec;
  out.q_flup_con = flup(con);
  out.q_flup_exp = flup(exp_arm);

  // pooled baseline summary
  std::vector<detail::sim_subject> all = con;
  all.insert(all.end(), exp_arm.begin(), exp_arm.end());

  if (tag == criteria_tag::zero_baseline) {
    out.q_base = screened_total > 0 ? static_cast<double>(screened_positive) /
                                          static_cast<double>(screened_total)
                                    : kNaN;
    out.aux.n_screened = static_cast<double>(screened_total);
    out.aux.n_excluded_history = static_cast<double>(screened_positive);
  } else if (tag == criteria_tag::event_at_enrollment_with_prior) {
    double mb = 0.0, mc = 0.0, me = 0.0;
    for (const auto& s : all) mb += static_cast<double>(s.base_count);
    for (const auto& s : con) mc += static_cast<double>(s.flup_count);
    for (const auto& s : exp_arm) me += static_cast<double>(s.flup_count);
    out.aux.mean_base_count = mb / static_cast<double>(all.size());
    out.aux.mean_flup_con = mc / static_cast<double>(con.size());
    out.aux.mean_flup_exp = me / static_cast<double>(exp_arm.size());
  } else if (tag == criteria_tag::median_iqr_baseline) {
    std::vector<double> counts;
    counts.reserve(all.size());
    for (const auto& s : all) counts.push_back(static_cast<double>(s.base_count));
    std::sort(counts.begin(), counts.end());
    auto quant = [&](double q) {  // type-7 sample quantile
      const double h = q * (static_cast<double>(counts.size()) - 1.0);
      const std::size_t i = static_cast<std::size_t>(h);
      const double f = h - static_cast<double>(i);
      return i + 1 < counts.size() ? counts[i] * (1.0 - f) + counts[i + 1] * f
                                   : counts.back();
    };
    out.aux.median_base = quant(0.5);
    out.aux.iqr_low = quant(0.25);
    out.aux.iqr_high = quant(0.75);
    double rc = 0.0, re = 0.0;
    for (const auto& s : con) rc += static_cast<double>(s.flup_count);
    for (const auto& s : exp_arm) re += static_cast<double>(s.flup_count);
    out.aux.rate_flup_con =
        rc / (static_cast<double>(con.size()) * spec.flup_years_con);
    out.aux.rate_flup_exp =
        re / (static_cast<double>(exp_arm.size()) * spec.flup_years_exp);
  } else if (spec.criteria.pins_lambda() && std::isnan(spec.q_base)) {
    out.q_base = kNaN;  // no baseline observation in the source study
  } else {
    out.q_base = frac(all, [](const detail::sim_subject& s) { return s.base_flag; });
  }
  return out;
}

inline study_spec simulate_study(const fit_result& fit, const study_spec& spec,
                                 std::uint64_t seed, double delta_sim = 1e-3) {
  model_params p{fit.lambda_hat, fit.mu_con_hat, fit.mu_exp_hat, fit.alpha_hat};
  return simulate_study(p, spec, seed, delta_sim);
}

struct bootstrap_result {
  double se_cohen_d = kNaN;
  double se_mrr = kNaN;
  double se_nrr = kNaN;  // NaN when too few replicates produced a value
  std::size_t n_failed = 0;
  std::size_t n_nrr_na = 0;
  std::size_t n_used = 0;
};

struct bootstrap_failure : std::runtime_error {
  bootstrap_failure(const std::string& what, bootstrap_result partial)
      : std::runtime_error(what), partial(partial) {}
  bootstrap_result partial;
};

// Parametric bootstrap: simulate at the fitted model, refit each artificial
// data set with the identical pipeline, report the SDs of the statistics.
inline bootstrap_result bootstrap_se(const fit_result& fit, const study_spec& spec,
                                     const bootstrap_config& cfg,
                                     const solve_options& solver = {}) {
  if (cfg.replicates < 2)
    throw std::domain_error("bootstrap_se: SD undefined for fewer than 2 replicates");
  if (!fit.converged)
    throw std::domain_error("bootstrap_se: refusing to bootstrap an unconverged fit");

  struct rep_stat {
    bool ok = false;
    double d = kNaN, mrr = kNaN, nrr = kNaN;
    bool has_nrr = false;
  };
  std::vector<rep_stat> stats(cfg.replicates);

  auto run_one = [&](std::size_t k) {
    rep_stat st;
    try {
      std::uint64_t sm = cfg.seed;
      (void)splitmix64(sm);
      const std::uint64_t rep_seed = sm ^ (0x9e3779b97f4a7c15ULL * (k + 1));
      const study_spec synth = simulate_study(fit, spec, rep_seed, cfg.delta_sim);
      const fit_result refit = fit_study(synth, solver);
      st.d = refit.cohen_d;
      st.mrr = refit.mrr;
      if (refit.nrr) {
        st.nrr = *refit.nrr;
        st.has_nrr = true;
      }
      st.ok = std::isfinite(st.d) && std::isfinite(st.mrr);
    } catch (const std::exception&) {
      st.ok = false;
    }
    stats[k] = st;
  };

  std::size_t nthreads = cfg.threads ? cfg.threads : std::thread::hardware_concurrency();
  nthreads = std::max<std::size_t>(1, std::min(nthreads, cfg.replicates));
  if (nthreads == 1) {
    for (std::size_t k = 0; k < cfg.replicates; ++k) run_one(k);
  } else {
    std::vector<std::thread> pool;
    std::size_t chunk = (cfg.replicates + nthreads - 1) / nthreads;
    for (std::size_t t = 0; t < nthreads; ++t) {
      const std::size_t a = t * chunk, b = std::min(cfg.replicates, a + chunk);
      if (a >= b) break;
      pool.emplace_back([&, a, b] {
        for (std::size_t k = a; k < b; ++k) run_one(k);
      });
    }
    for (auto& th : pool) th.join();
  }

  bootstrap_result out;
  std::vector<double> ds, mrrs, nrrs;
  for (const rep_stat& st : stats) {
    if (!st.ok) {
      ++out.n_failed;
      continue;
    }
    ds.push_back(st.d);
    mrrs.push_back(st.mrr);
    if (st.has_nrr)
      nrrs.push_back(st.nrr);
    else
      ++out.n_nrr_na;
  }
  out.n_used = ds.size();

  auto sample_sd = [](const std::vector<double>& v) {
    if (v.size() < 2) return kNaN;
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / (static_cast<double>(v.size()) - 1.0));
  };
  out.se_cohen_d = sample_sd(ds);
  out.se_mrr = sample_sd(mrrs);
  out.se_nrr = sample_sd(nrrs);

  const double failed_frac =
      static_cast<double>(out.n_failed) / static_cast<double>(cfg.replicates);
  if (cfg.failure_policy == bootstrap_config::policy::abort_over_threshold &&
      failed_frac > cfg.max_failure_fraction)
    throw bootstrap_failure("bootstrap_se: failure fraction above threshold", out);
  return out;
}

}  // namespace frailmeta
