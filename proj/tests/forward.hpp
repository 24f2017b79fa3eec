#pragma once

// Forward construction of synthetic studies: observed summaries are the
// exact model values at a chosen parameter set, so solving the system must
// recover that set (up to identifiability).

#include <string>
#include <vector>

#include "frailmeta/fit.hpp"
#include "frailmeta/optimize.hpp"
#include "frailmeta/study.hpp"

namespace forward {

using namespace frailmeta;

// Fill the observed fields of `shell` with model values at `truth`, and set
// r_hyp to the model correlation.  The shell carries windows, sizes and the
// criteria variant; observation fields may hold placeholders.
inline study_spec observe(study_spec shell, const model_params& truth) {
  // zero placeholders make the defect vector equal the model quantities
  if (!shell.uses_count_summaries()) {
    shell.q_base = shell.criteria.pins_lambda() ? kNaN : 0.0;
    shell.q_flup_con = 0.0;
    shell.q_flup_exp = 0.0;
  } else if (shell.criteria.tag == criteria_tag::event_at_enrollment_with_prior) {
    shell.aux.mean_base_count = 0.0;
    shell.aux.mean_flup_con = 0.0;
    shell.aux.mean_flup_exp = 0.0;
  } else {
    shell.aux.median_base = 0.0;
    shell.aux.iqr_low = 0.0;
    shell.aux.iqr_high = 0.0;
    shell.aux.rate_flup_con = 0.0;
    shell.aux.rate_flup_exp = 0.0;
  }
  shell.r_hyp = 0.5;  // placeholder, replaced below

  const equation_system sys(shell);
  const vecd d = sys.defects(truth);

  std::size_t i = 0;
  switch (shell.criteria.tag) {
    case criteria_tag::event_at_enrollment_with_prior:
      shell.aux.mean_base_count = d[i++];
      shell.aux.mean_flup_con = d[i++];
      shell.aux.mean_flup_exp = d[i++];
      break;
    case criteria_tag::median_iqr_baseline:
      shell.aux.median_base = d[i++];
      shell.aux.iqr_low = d[i++];
      shell.aux.iqr_high = d[i++];
      shell.aux.rate_flup_con = d[i++];
      shell.aux.rate_flup_exp = d[i++];
      break;
    default:
      if (!shell.criteria.pins_lambda()) shell.q_base = d[i++];
      shell.q_flup_con = d[i++];
      shell.q_flup_exp = d[i++];
      break;
  }
  shell.r_hyp = d[i] + 0.5;  // model_r = defect + placeholder
  shell.validate();
  return shell;
}

// A deterministic battery of parameter points per variant (Halton design on
// moderate log-ranges, where every variant stays identifiable).
inline std::vector<model_params> parameter_battery(std::size_t count,
                                                   unsigned salt) {
  std::vector<model_params> out;
  auto span = [](double u, double lo, double hi) {
    return lo * std::exp(u * std::log(hi / lo));
  };
  for (std::size_t k = 0; k < count; ++k) {
    model_params p;
    p.lambda = span(halton(k + 1 + salt, 2), 0.15, 1.6);
    p.mu_con = span(halton(k + 1 + salt, 3), 0.08, 1.2);
    p.mu_exp = span(halton(k + 1 + salt, 5), 0.08, 1.2);
    p.alpha = span(halton(k + 1 + salt, 7), 0.35, 4.0);
    out.push_back(p);
  }
  return out;
}

inline study_spec shell_for(criteria_tag tag, std::size_t k,
                            double pinned_lambda = 0.0) {
  study_spec s;
  s.study_id = "synthetic";
  s.arm_label = std::to_string(k);
  s.n_con = s.n_exp = 200;
  // alternate fixed and lifetime baseline windows through the battery
  if (k % 3 == 2)
    s.baseline_window = lifetime_window(12.0, 17.0, 14.6, 1.3);
  else
    s.baseline_window = fixed_window(tag == criteria_tag::two_in_year_one_recent ||
                                             tag == criteria_tag::median_iqr_baseline
                                         ? 4.0
                                         : 2.0);
  s.flup_years_con = 1.0;
  s.flup_years_exp = 0.75;
  s.criteria.tag = tag;
  switch (tag) {
    case criteria_tag::recent_given_lifetime:
      s.criteria.delta = 0.5;
      break;
    case criteria_tag::two_in_year_one_recent:
    case criteria_tag::median_iqr_baseline:
      s.criteria.delta = 16.0 / 52.0;
      break;
    case criteria_tag::event_at_enrollment_with_prior:
      s.criteria.delta = 1.0;
      break;
    case criteria_tag::first_harm_recent:
      s.criteria.delta1 = 0.25;
      s.criteria.delta2 = 1.0 / 12.0;
      break;
    default:
      break;
  }
  s.criteria.default_rate = pinned_lambda;
  return s;
}

}  // namespace forward
