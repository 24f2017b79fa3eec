#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "forward.hpp"
#include "frailmeta/bootstrap.hpp"
#include "frailmeta/fit.hpp"

using namespace frailmeta;

namespace {

study_spec default_study(long n_per_arm) {
  const model_params truth{0.5, 0.6, 0.35, 1.1};
  study_spec s = forward::observe(forward::shell_for(criteria_tag::none, 0), truth);
  s.study_id = "boot";
  s.n_con = s.n_exp = n_per_arm;
  return s;
}

const model_params kTruth{0.5, 0.6, 0.35, 1.1};

}  // namespace

TEST_CASE("simulate_study determinism") {
  const study_spec s = default_study(300);
  const study_spec a = simulate_study(kTruth, s, 99);
  const study_spec b = simulate_study(kTruth, s, 99);
  CHECK(a.q_base == b.q_base);
  CHECK(a.q_flup_con == b.q_flup_con);
  CHECK(a.q_flup_exp == b.q_flup_exp);
  const study_spec c = simulate_study(kTruth, s, 100);
  CHECK(a.q_base != c.q_base);  // a different seed moves the sample
}

TEST_CASE("simulate_study large-sample law of large numbers") {
  study_spec s = default_study(1'000'000);
  const study_spec synth = simulate_study(kTruth, s, 7);
  CHECK(std::abs(synth.q_base - s.q_base) < 0.005);
  CHECK(std::abs(synth.q_flup_con - s.q_flup_con) < 0.005);
  CHECK(std::abs(synth.q_flup_exp - s.q_flup_exp) < 0.005);
}

TEST_CASE("simulate_study is unbiased for the baseline proportion") {
  const long n_per_arm = 250;
  const study_spec s = default_study(n_per_arm);
  const int reps = 200;
  double sum = 0.0;
  for (int k = 0; k < reps; ++k)
    sum += simulate_study(kTruth, s, 1000 + k).q_base;
  const double mean = sum / reps;
  const double q = s.q_base;
  const double tol = 3.0 * std::sqrt(q * (1.0 - q) / (2.0 * n_per_arm * reps));
  CHECK(std::abs(mean - q) < tol);
}

TEST_CASE("simulate_study honors the criteria screens") {
  // zero-baseline: enrolled subjects all have a clean history, yet the
  // screened-population q_base stays near the model value
  const model_params p{0.3, 0.4, 0.25, 0.7};
  study_spec shell = forward::shell_for(criteria_tag::zero_baseline, 0);
  shell.study_id = "screened";
  study_spec s = forward::observe(shell, p);
  s.n_con = s.n_exp = 4000;
  const study_spec synth = simulate_study(p, s, 11);
  CHECK(std::abs(synth.q_base - s.q_base) < 0.02);
  CHECK(synth.aux.n_screened > synth.aux.n_excluded_history);

  // at-least-one-baseline: the recorded proportion is P(>=2 | >=1)
  study_spec shell2 = forward::shell_for(criteria_tag::at_least_one_baseline, 0);
  shell2.study_id = "screened2";
  study_spec s2 = forward::observe(shell2, p);
  s2.n_con = s2.n_exp = 4000;
  const study_spec synth2 = simulate_study(p, s2, 12);
  CHECK(std::abs(synth2.q_base - s2.q_base) < 0.03);
}

TEST_CASE("simulate_study flags infeasible screens") {
  // with everyone carrying baseline history, a zero-baseline screen starves
  const model_params p{50.0, 0.4, 0.25, 5.0};
  study_spec shell = forward::shell_for(criteria_tag::zero_baseline, 0);
  shell.study_id = "starved";
  shell.baseline_window = fixed_window(2.0);
  shell.q_base = 0.5;
  shell.q_flup_con = 0.2;
  shell.q_flup_exp = 0.2;
  shell.r_hyp = 0.3;
  shell.n_con = shell.n_exp = 50;
  CHECK_THROWS_AS(simulate_study(p, shell, 5), simulation_infeasible);
}

TEST_CASE("bootstrap_se determinism and basic behavior") {
  const study_spec s = default_study(120);
  const fit_result fit = fit_study(s);
  REQUIRE(fit.converged);

  bootstrap_config cfg;
  cfg.replicates = 40;
  cfg.seed = 31;
  const bootstrap_result a = bootstrap_se(fit, s, cfg);
  const bootstrap_result b = bootstrap_se(fit, s, cfg);
  CHECK(a.se_cohen_d == b.se_cohen_d);
  CHECK(a.se_mrr == b.se_mrr);
  CHECK(a.n_failed == b.n_failed);

  // threading does not change the reduction
  bootstrap_config cfg1 = cfg;
  cfg1.threads = 1;
  const bootstrap_result c = bootstrap_se(fit, s, cfg1);
  CHECK(a.se_cohen_d == c.se_cohen_d);

  CHECK(std::isfinite(a.se_cohen_d));
  CHECK(a.se_cohen_d > 0.0);
  CHECK(a.n_used + a.n_failed == cfg.replicates);
}

TEST_CASE("bootstrap_se rejects degenerate configs") {
  const study_spec s = default_study(100);
  const fit_result fit = fit_study(s);
  bootstrap_config cfg;
  cfg.replicates = 1;
  CHECK_THROWS_AS(bootstrap_se(fit, s, cfg), std::domain_error);

  fit_result bad = fit;
  bad.converged = false;
  cfg.replicates = 10;
  CHECK_THROWS_AS(bootstrap_se(bad, s, cfg), std::domain_error);
}

TEST_CASE("bootstrap SE of q_base matches binomial sampling theory") {
  const long n_arm = 250;  // pooled baseline sample of 500
  const study_spec s = default_study(n_arm);
  const int reps = 400;
  std::vector<double> qs(reps);
  for (int k = 0; k < reps; ++k)
    qs[k] = simulate_study(kTruth, s, 500 + k).q_base;
  double m = 0.0;
  for (double q : qs) m += q;
  m /= reps;
  double ss = 0.0;
  for (double q : qs) ss += (q - m) * (q - m);
  const double sd = std::sqrt(ss / (reps - 1.0));
  const double binom = std::sqrt(s.q_base * (1.0 - s.q_base) / (2.0 * n_arm));
  CHECK(std::abs(sd - binom) / binom < 0.15);
}

TEST_CASE("bootstrap SEs scale as 1/sqrt(n)") {
  bootstrap_config cfg;
  cfg.replicates = 150;
  cfg.seed = 17;

  double prev = 0.0;
  std::vector<double> ses;
  for (long n : {100L, 400L, 1600L}) {
    const study_spec s = default_study(n);
    const fit_result fit = fit_study(s);
    REQUIRE(fit.converged);
    const bootstrap_result r = bootstrap_se(fit, s, cfg);
    REQUIRE(r.n_failed < cfg.replicates / 5);
    ses.push_back(r.se_cohen_d);
    (void)prev;
  }
  CHECK(ses[0] / ses[1] == Catch::Approx(2.0).epsilon(0.15));
  CHECK(ses[1] / ses[2] == Catch::Approx(2.0).epsilon(0.15));
}

TEST_CASE("failure policy is explicit") {
  // a fit whose parameters starve the screen: every replicate fails
  const study_spec s = [] {
    study_spec shell = forward::shell_for(criteria_tag::zero_baseline, 0);
    shell.study_id = "starved";
    shell.baseline_window = fixed_window(2.0);
    shell.q_base = 0.5;
    shell.q_flup_con = 0.2;
    shell.q_flup_exp = 0.2;
    shell.r_hyp = 0.3;
    shell.n_con = shell.n_exp = 50;
    return shell;
  }();
  fit_result fake;
  fake.lambda_hat = 50.0;
  fake.mu_con_hat = 0.4;
  fake.mu_exp_hat = 0.25;
  fake.alpha_hat = 5.0;
  fake.converged = true;

  bootstrap_config cfg;
  cfg.replicates = 5;
  cfg.seed = 3;

  cfg.failure_policy = bootstrap_config::policy::drop_and_count;
  const bootstrap_result r = bootstrap_se(fake, s, cfg);
  CHECK(r.n_failed == 5);
  CHECK(std::isnan(r.se_cohen_d));

  cfg.failure_policy = bootstrap_config::policy::abort_over_threshold;
  CHECK_THROWS_AS(bootstrap_se(fake, s, cfg), bootstrap_failure);
}

TEST_CASE("NA relative-risk replicates are counted, not silently dropped") {
  // heavy heterogeneity: the fitted alpha is small, NR RR is NA for the fit
  // and for every replicate
  study_spec shell = forward::shell_for(criteria_tag::none, 0);
  shell.study_id = "heavy";
  const model_params truth{0.3, 0.5, 0.35, 0.08};
  study_spec s = forward::observe(shell, truth);
  s.n_con = s.n_exp = 400;
  const fit_result fit = fit_study(s);
  REQUIRE(fit.converged);
  REQUIRE_FALSE(fit.nrr.has_value());

  bootstrap_config cfg;
  cfg.replicates = 20;
  cfg.seed = 8;
  const bootstrap_result r = bootstrap_se(fit, s, cfg);
  CHECK(r.n_nrr_na + r.n_failed > 0);
  CHECK(r.n_nrr_na <= cfg.replicates);
}
