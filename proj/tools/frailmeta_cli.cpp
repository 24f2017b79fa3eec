#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "frailmeta/bootstrap.hpp"
#include "frailmeta/descriptor.hpp"
#include "frailmeta/fit.hpp"
#include "frailmeta/report.hpp"

namespace {

std::uint64_t env_default_seed() {
  const char* s = std::getenv("FRAILMETA_SEED");
  if (!s) return 0;
  return std::strtoull(s, nullptr, 10);
}

int cmd_validate(const std::string& path) {
  try {
    const auto specs = frailmeta::load_descriptors(path);
    std::printf("OK: %zu stud%s validated\n", specs.size(),
                specs.size() == 1 ? "y" : "ies");
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "validation failed: %s\n", e.what());
    return 1;
  }
}

int cmd_fit(const std::string& path, const std::vector<double>& r_hyps,
            std::size_t bootstrap, std::uint64_t seed, const std::string& out_dir,
            bool positive_good, bool emit_plots) {
  std::vector<frailmeta::study_spec> specs;
  try {
    specs = frailmeta::load_descriptors(path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }

  frailmeta::batch_config cfg;
  cfg.r_hyps = r_hyps;
  cfg.bootstrap_replicates = bootstrap;
  cfg.seed = seed;
  cfg.report_positive_good = positive_good;

  const frailmeta::batch_result res = frailmeta::run_batch(specs, cfg);

  std::filesystem::create_directories(out_dir);
  frailmeta::write_text_file(out_dir + "/results.csv",
                             frailmeta::results_to_csv(res.rows));
  frailmeta::write_text_file(
      out_dir + "/results.json",
      frailmeta::results_to_json(res.rows, res.statuses).dump(2) + "\n");

  if (emit_plots) {
    std::map<std::string, std::vector<frailmeta::result_row>> by_outcome;
    for (const auto& r : res.rows) by_outcome[r.outcome].push_back(r);
    for (const auto& [outcome, rows] : by_outcome)
      frailmeta::write_text_file(out_dir + "/forest_" + outcome + ".svg",
                                 frailmeta::forest_svg(rows, outcome));
  }

  for (const auto& r : res.rows) {
    std::printf("%-24s r_hyp=%.1f  d=%s",
                (r.study_id + (r.arm_label.empty() ? "" : "/" + r.arm_label)).c_str(),
                r.r_hyp, frailmeta::detail::fmt(r.cohen_d).c_str());
    if (!std::isnan(r.se_cohen_d))
      std::printf(" (se %s)", frailmeta::detail::fmt(r.se_cohen_d).c_str());
    std::printf("  mrr=%s nrr=%s  residual=%.3g%s\n",
                frailmeta::detail::fmt(r.mrr).c_str(),
                frailmeta::detail::fmt(r.nrr).c_str(), r.residual,
                r.converged ? "" : "  [not converged]");
  }
  bool any_fail = false;
  for (const auto& s : res.statuses) {
    if (!s.ok) {
      any_fail = true;
      std::printf("FAILED %-18s r_hyp=%.1f: %s\n", s.study_id.c_str(), s.r_hyp,
                  s.message.c_str());
    }
  }
  std::printf("%zu result row%s -> %s\n", res.rows.size(),
              res.rows.size() == 1 ? "" : "s", out_dir.c_str());
  return any_fail ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gamma-frailty point-process meta-analysis engine"};
  app.require_subcommand(1);

  // fit
  auto* fit = app.add_subcommand("fit", "fit studies from a descriptor file");
  std::string fit_path, out_dir = "out";
  std::vector<double> r_hyps = {0.1, 0.3, 0.5};
  std::size_t bootstrap = 1000;
  std::uint64_t seed = env_default_seed();
  bool positive_good = false, emit_plots = false;
  fit->add_option("descriptor", fit_path, "study descriptor (json or csv)")
      ->required();
  fit->add_option("--r-hyp", r_hyps,
                  "hypothesized baseline/follow-up correlations")
      ->delimiter(',');
  fit->add_option("--bootstrap", bootstrap,
                  "bootstrap replicates for SEs (0 disables)");
  fit->add_option("--seed", seed, "RNG seed (env FRAILMETA_SEED overrides 0)");
  fit->add_option("--out", out_dir, "output directory");
  fit->add_flag("--report-positive-good", positive_good,
                "flip the sign of Cohen's d in output");
  fit->add_flag("--emit-plots", emit_plots, "write forest-style SVG plots");

  // validate
  auto* val = app.add_subcommand("validate", "validate a descriptor file");
  std::string val_path;
  val->add_option("descriptor", val_path, "study descriptor (json or csv)")
      ->required();

  // simulate
  auto* sim = app.add_subcommand(
      "simulate", "generate a synthetic study from model parameters");
  double s_alpha = 1.0, s_lambda = 0.5, s_mu_con = 0.5, s_mu_exp = 0.25;
  long s_ncon = 200, s_nexp = 200;
  double s_base_years = 1.0, s_flup_con = 1.0, s_flup_exp = 1.0;
  std::string s_variant = "default";
  double s_delta = 0.0, s_delta1 = 0.0, s_delta2 = 0.0, s_r_hyp = 0.3;
  std::vector<double> s_ages;  // min,max,mean,sd for a lifetime window
  std::uint64_t s_seed = env_default_seed();
  std::string s_out;
  sim->add_option("--alpha", s_alpha, "frailty shape")->required();
  sim->add_option("--lambda", s_lambda, "baseline rate per year")->required();
  sim->add_option("--mu-con", s_mu_con, "control follow-up rate")->required();
  sim->add_option("--mu-exp", s_mu_exp, "experimental follow-up rate")->required();
  sim->add_option("--n-con", s_ncon, "control arm size");
  sim->add_option("--n-exp", s_nexp, "experimental arm size");
  sim->add_option("--base-years", s_base_years, "fixed baseline window, years");
  sim->add_option("--ages", s_ages,
                  "lifetime baseline window: min,max,mean,sd of age")
      ->delimiter(',')
      ->expected(4);
  sim->add_option("--flup-con", s_flup_con, "control follow-up window, years");
  sim->add_option("--flup-exp", s_flup_exp, "experimental follow-up window, years");
  sim->add_option("--variant", s_variant, "criteria variant tag");
  sim->add_option("--delta", s_delta, "variant span delta, years");
  sim->add_option("--delta1", s_delta1, "variant span delta1, years");
  sim->add_option("--delta2", s_delta2, "variant span delta2, years");
  sim->add_option("--r-hyp", s_r_hyp, "r_hyp recorded in the descriptor");
  sim->add_option("--seed", s_seed, "RNG seed");
  sim->add_option("--out", s_out, "write descriptor JSON here (default stdout)");

  CLI11_PARSE(app, argc, argv);

  if (val->parsed()) return cmd_validate(val_path);
  if (fit->parsed())
    return cmd_fit(fit_path, r_hyps, bootstrap, seed, out_dir, positive_good,
                   emit_plots);

  if (sim->parsed()) {
    try {
      frailmeta::study_spec spec;
      spec.study_id = "synthetic";
      spec.n_con = s_ncon;
      spec.n_exp = s_nexp;
      if (s_ages.size() == 4)
        spec.baseline_window =
            frailmeta::lifetime_window(s_ages[0], s_ages[1], s_ages[2], s_ages[3]);
      else
        spec.baseline_window = frailmeta::fixed_window(s_base_years);
      spec.flup_years_con = s_flup_con;
      spec.flup_years_exp = s_flup_exp;
      spec.criteria.tag = frailmeta::detail::parse_criteria_tag(s_variant);
      spec.criteria.delta = s_delta;
      spec.criteria.delta1 = s_delta1;
      spec.criteria.delta2 = s_delta2;
      spec.r_hyp = s_r_hyp;
      spec.q_base = 0.0;  // placeholders; simulate_study fills the summaries
      spec.q_flup_con = 0.0;
      spec.q_flup_exp = 0.0;
      if (spec.criteria.tag == frailmeta::criteria_tag::median_iqr_baseline) {
        spec.aux.median_base = spec.aux.iqr_low = spec.aux.iqr_high = 0.0;
        spec.aux.rate_flup_con = spec.aux.rate_flup_exp = 0.0;
      }
      if (spec.criteria.tag ==
          frailmeta::criteria_tag::event_at_enrollment_with_prior) {
        spec.aux.mean_base_count = 2.0;
        spec.aux.mean_flup_con = spec.aux.mean_flup_exp = 0.0;
      }
      frailmeta::model_params p{s_lambda, s_mu_con, s_mu_exp, s_alpha};
      const frailmeta::study_spec synth =
          frailmeta::simulate_study(p, spec, s_seed);
      nlohmann::json root;
      root["schema_version"] = frailmeta::kSchemaVersion;
      root["studies"] = nlohmann::json::array({frailmeta::study_to_json(synth)});
      const std::string text = root.dump(2) + "\n";
      if (s_out.empty())
        std::fputs(text.c_str(), stdout);
      else
        frailmeta::write_text_file(s_out, text);
      return 0;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return 1;
    }
  }
  return 1;
}
