#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "frailmeta/window.hpp"

namespace frailmeta {

enum class outcome_kind { attempt, nssi, shb, ideation_binary };

// One family of "clean" inclusion/exclusion rules, expressible inside the
// event-process model and therefore correctable.
enum class criteria_tag {
  none,                            // no screen; theoretical moments as-is
  at_least_one_baseline,           // enrolled iff >= 1 baseline event
  zero_baseline,                   // enrolled iff no baseline event
  recent_given_lifetime,           // >= 1 lifetime event; recent span reported
  two_in_year_one_recent,          // >= 2 events in the past year, one recent
  event_at_enrollment_with_prior,  // event at enrollment plus a prior one
  event_at_enrollment,             // event at enrollment
  first_harm_recent,               // event in the last month; first-harm span reported
  median_iqr_baseline,             // screen as two_in_year..., counts summarized as median/IQR
};

struct criteria_variant {
  criteria_tag tag = criteria_tag::none;
  double delta = 0.0;         // recent/prior span in years (variant-specific)
  double delta1 = 0.0;        // longer span (first-harm lookback)
  double delta2 = 0.0;        // shorter span (inclusion event window)
  double default_rate = 0.0;  // externally supplied baseline rate; pins lambda

  void validate() const {
    auto span_ok = [](double v) { return std::isfinite(v) && v > 0.0; };
    switch (tag) {
      case criteria_tag::none:
      case criteria_tag::at_least_one_baseline:
      case criteria_tag::zero_baseline:
      case criteria_tag::event_at_enrollment:
        break;
      case criteria_tag::recent_given_lifetime:
      case criteria_tag::two_in_year_one_recent:
      case criteria_tag::event_at_enrollment_with_prior:
      case criteria_tag::median_iqr_baseline:
        if (!span_ok(delta))
          throw std::domain_error("criteria_variant: delta span must be positive");
        break;
      case criteria_tag::first_harm_recent:
        if (!span_ok(delta1) || !span_ok(delta2) || !(delta1 > delta2))
          throw std::domain_error("criteria_variant: need delta1 > delta2 > 0");
        break;
    }
    if (default_rate != 0.0 && !(std::isfinite(default_rate) && default_rate > 0.0))
      throw std::domain_error("criteria_variant: default_rate must be positive");
  }

  bool pins_lambda() const { return default_rate > 0.0; }
};

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Variant-specific summaries that replace or supplement the q proportions.
struct aux_observations {
  double mean_base_count = kNaN;   // Wood-style expected baseline count
  double mean_flup_con = kNaN;     // Wood-style follow-up mean counts
  double mean_flup_exp = kNaN;
  double median_base = kNaN;       // Mehlum-style count summaries
  double iqr_low = kNaN;
  double iqr_high = kNaN;
  double rate_flup_con = kNaN;     // Mehlum-style follow-up rates per year
  double rate_flup_exp = kNaN;
  double n_screened = kNaN;        // provenance for zero-baseline q_base
  double n_excluded_history = kNaN;
};

// Everything the engine needs about one study arm comparison.
struct study_spec {
  std::string study_id;
  std::string arm_label;  // distinguishes multiple experimental arms
  outcome_kind outcome = outcome_kind::attempt;
  long n_con = 1;
  long n_exp = 1;
  double q_base = kNaN;
  double q_flup_con = kNaN;
  double q_flup_exp = kNaN;
  shb_window baseline_window = fixed_window(1.0);
  double flup_years_con = 1.0;
  double flup_years_exp = 1.0;
  criteria_variant criteria;
  double r_hyp = 0.3;
  aux_observations aux;

  bool uses_count_summaries() const {
    return criteria.tag == criteria_tag::event_at_enrollment_with_prior ||
           criteria.tag == criteria_tag::median_iqr_baseline;
  }

  void validate() const {
    if (study_id.empty()) throw std::domain_error("study_spec: empty study_id");
    if (n_con < 1 || n_exp < 1)
      throw std::domain_error("study_spec: sample sizes must be >= 1");
    auto prop_ok = [](double q) {
      return std::isnan(q) || (q >= 0.0 && q <= 1.0);
    };
    if (!uses_count_summaries()) {
      if (!prop_ok(q_base) || !prop_ok(q_flup_con) || !prop_ok(q_flup_exp))
        throw std::domain_error("study_spec: proportions must lie in [0,1]");
      if (std::isnan(q_flup_con) || std::isnan(q_flup_exp))
        throw std::domain_error("study_spec: follow-up proportions are required");
    }
    if (!(flup_years_con > 0.0) || !(flup_years_exp > 0.0))
      throw std::domain_error("study_spec: follow-up windows must be positive");
    if (!(r_hyp > 0.0 && r_hyp < 1.0))
      throw std::domain_error("study_spec: r_hyp must lie in (0,1)");
    criteria.validate();
    if (criteria.tag == criteria_tag::median_iqr_baseline) {
      if (std::isnan(aux.median_base) || std::isnan(aux.iqr_low) ||
          std::isnan(aux.iqr_high))
        throw std::domain_error("study_spec: median/IQR summaries required");
      if (std::isnan(aux.rate_flup_con) || std::isnan(aux.rate_flup_exp))
        throw std::domain_error("study_spec: follow-up rates required");
    }
    if (criteria.tag == criteria_tag::event_at_enrollment_with_prior) {
      if (std::isnan(aux.mean_base_count) || std::isnan(aux.mean_flup_con) ||
          std::isnan(aux.mean_flup_exp))
        throw std::domain_error("study_spec: mean count summaries required");
    }
  }
};

struct solver_trace {
  std::size_t starts = 0;
  std::size_t evaluations = 0;
  double worst_start = 0.0;  // residual of the least successful start
};

struct fit_result {
  double lambda_hat = 0.0;
  double mu_con_hat = 0.0;
  double mu_exp_hat = 0.0;
  double alpha_hat = 0.0;
  double residual = 0.0;  // sum of squared equation defects
  double q_base_annual = kNaN;
  double q_flup_con_annual = kNaN;
  double q_flup_exp_annual = kNaN;
  double r_check = kNaN;
  double cohen_d = kNaN;
  double sd_effect = kNaN;
  double mrr = kNaN;
  std::optional<double> nrr;  // empty = NA
  bool converged = false;
  bool at_bound = false;       // a parameter ended on the search box
  bool degenerate_sd = false;  // a marginal collapsed in the SD formula
  solver_trace trace;
};

}  // namespace frailmeta
