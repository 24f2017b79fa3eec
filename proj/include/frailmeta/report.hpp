#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "frailmeta/bootstrap.hpp"
#include "frailmeta/descriptor.hpp"
#include "frailmeta/fit.hpp"
#include "frailmeta/study.hpp"

namespace frailmeta {

// One output row per (study, arm, r_hyp) cell; mirrors the fitted-model
// summary table with its bootstrap SEs.
struct result_row {
  std::string study_id;
  std::string arm_label;
  std::string outcome;
  double r_hyp = 0.0;
  double lambda_hat = 0.0, mu_con_hat = 0.0, mu_exp_hat = 0.0, alpha_hat = 0.0;
  double residual = 0.0;
  double q_base_annual = kNaN, q_flup_con_annual = kNaN, q_flup_exp_annual = kNaN;
  double r_check = kNaN;
  double cohen_d = kNaN;
  double sd_effect = kNaN;
  double se_cohen_d = kNaN;
  double mrr = kNaN;
  double se_mrr = kNaN;
  std::optional<double> nrr;
  double se_nrr = kNaN;
  bool converged = false;
  std::size_t n_bootstrap_failed = 0;
};

struct study_status {
  std::string study_id;
  std::string arm_label;
  double r_hyp = 0.0;
  bool ok = true;
  std::string message;
};

struct batch_config {
  std::vector<double> r_hyps = {0.1, 0.3, 0.5};
  std::size_t bootstrap_replicates = 1000;  // 0 disables the bootstrap
  std::uint64_t seed = 0;
  bool report_positive_good = false;  // flip the sign of Cohen's d in output
  solve_options solver;
  bootstrap_config::policy failure_policy = bootstrap_config::policy::drop_and_count;
  std::size_t threads = 0;
};

struct batch_result {
  std::vector<result_row> rows;
  std::vector<study_status> statuses;
  bool all_ok = true;
};

inline batch_result run_batch(std::vector<study_spec> specs,
                              const batch_config& cfg) {
  std::sort(specs.begin(), specs.end(), [](const study_spec& a, const study_spec& b) {
    return a.study_id != b.study_id ? a.study_id < b.study_id
                                    : a.arm_label < b.arm_label;
  });

  batch_result out;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    for (std::size_t j = 0; j < cfg.r_hyps.size(); ++j) {
      study_spec spec = specs[i];
      spec.r_hyp = cfg.r_hyps[j];
      study_status st{spec.study_id, spec.arm_label, spec.r_hyp, true, ""};
      try {
        const fit_result fit = fit_study(spec, cfg.solver);
        result_row row;
        row.study_id = spec.study_id;
        row.arm_label = spec.arm_label;
        row.outcome = detail::outcome_name(spec.outcome);
        row.r_hyp = spec.r_hyp;
        row.lambda_hat = fit.lambda_hat;
        row.mu_con_hat = fit.mu_con_hat;
        row.mu_exp_hat = fit.mu_exp_hat;
        row.alpha_hat = fit.alpha_hat;
        row.residual = fit.residual;
        row.q_base_annual = fit.q_base_annual;
        row.q_flup_con_annual = fit.q_flup_con_annual;
        row.q_flup_exp_annual = fit.q_flup_exp_annual;
        row.r_check = fit.r_check;
        row.cohen_d = cfg.report_positive_good ? -fit.cohen_d : fit.cohen_d;
        row.sd_effect = fit.sd_effect;
        row.mrr = fit.mrr;
        row.nrr = fit.nrr;
        row.converged = fit.converged;
        if (cfg.bootstrap_replicates >= 2) {
          bootstrap_config bc;
          bc.replicates = cfg.bootstrap_replicates;
          std::uint64_t sm = cfg.seed ^ (0x9e3779b97f4a7c15ULL * (i * 131 + j + 1));
          bc.seed = splitmix64(sm);
          bc.failure_policy = cfg.failure_policy;
          bc.threads = cfg.threads;
          const bootstrap_result se = bootstrap_se(fit, spec, bc, cfg.solver);
          row.se_cohen_d = se.se_cohen_d;
          row.se_mrr = se.se_mrr;
          row.se_nrr = se.se_nrr;
          row.n_bootstrap_failed = se.n_failed;
        }
        out.rows.push_back(std::move(row));
      } catch (const std::exception& e) {
        st.ok = false;
        st.message = e.what();
        out.all_ok = false;
      }
      out.statuses.push_back(std::move(st));
    }
  }
  return out;
}

namespace detail {

inline std::string fmt(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string fmt(const std::optional<double>& v) {
  return v ? fmt(*v) : std::string("NA");
}

}  // namespace detail

inline const char* results_csv_header() {
  return "study_id,arm_label,outcome,r_hyp,lambda_hat,mu_con_hat,mu_exp_hat,"
         "alpha_hat,residual,q_base_annual,q_flup_con_annual,q_flup_exp_annual,"
         "r_check,cohen_d,sd_effect,se_cohen_d,mrr,se_mrr,nrr,se_nrr,converged,"
         "n_bootstrap_failed";
}

inline std::string results_to_csv(const std::vector<result_row>& rows) {
  std::string out = results_csv_header();
  out += '\n';
  for (const result_row& r : rows) {
    out += r.study_id + ',' + r.arm_label + ',' + r.outcome + ',';
    out += detail::fmt(r.r_hyp) + ',' + detail::fmt(r.lambda_hat) + ',' +
           detail::fmt(r.mu_con_hat) + ',' + detail::fmt(r.mu_exp_hat) + ',' +
           detail::fmt(r.alpha_hat) + ',' + detail::fmt(r.residual) + ',' +
           detail::fmt(r.q_base_annual) + ',' + detail::fmt(r.q_flup_con_annual) +
           ',' + detail::fmt(r.q_flup_exp_annual) + ',' + detail::fmt(r.r_check) +
           ',' + detail::fmt(r.cohen_d) + ',' + detail::fmt(r.sd_effect) + ',' +
           detail::fmt(r.se_cohen_d) + ',' + detail::fmt(r.mrr) + ',' +
           detail::fmt(r.se_mrr) + ',' + detail::fmt(r.nrr) + ',' +
           detail::fmt(r.se_nrr) + ',' + (r.converged ? "true" : "false") + ',' +
           std::to_string(r.n_bootstrap_failed) + '\n';
  }
  return out;
}

inline nlohmann::json results_to_json(const std::vector<result_row>& rows,
                                      const std::vector<study_status>& statuses) {
  nlohmann::json root;
  root["schema_version"] = kSchemaVersion;
  nlohmann::json arr = nlohmann::json::array();
  for (const result_row& r : rows) {
    nlohmann::json j;
    j["study_id"] = r.study_id;
    j["arm_label"] = r.arm_label;
    j["outcome"] = r.outcome;
    j["r_hyp"] = r.r_hyp;
    j["lambda_hat"] = r.lambda_hat;
    j["mu_con_hat"] = r.mu_con_hat;
    j["mu_exp_hat"] = r.mu_exp_hat;
    j["alpha_hat"] = r.alpha_hat;
    j["residual"] = r.residual;
    j["q_base_annual"] = r.q_base_annual;
    j["q_flup_con_annual"] = r.q_flup_con_annual;
    j["q_flup_exp_annual"] = r.q_flup_exp_annual;
    j["r_check"] = r.r_check;
    j["cohen_d"] = r.cohen_d;
    j["sd_effect"] = r.sd_effect;
    auto opt = [](double v) {
      return std::isnan(v) ? nlohmann::json() : nlohmann::json(v);
    };
    j["se_cohen_d"] = opt(r.se_cohen_d);
    j["mrr"] = opt(r.mrr);
    j["se_mrr"] = opt(r.se_mrr);
    j["nrr"] = r.nrr ? nlohmann::json(*r.nrr) : nlohmann::json();
    j["se_nrr"] = opt(r.se_nrr);
    j["converged"] = r.converged;
    j["n_bootstrap_failed"] = r.n_bootstrap_failed;
    arr.push_back(std::move(j));
  }
  root["results"] = std::move(arr);
  nlohmann::json st = nlohmann::json::array();
  for (const study_status& s : statuses) {
    nlohmann::json j;
    j["study_id"] = s.study_id;
    j["arm_label"] = s.arm_label;
    j["r_hyp"] = s.r_hyp;
    j["ok"] = s.ok;
    j["message"] = s.message;
    st.push_back(std::move(j));
  }
  root["statuses"] = std::move(st);
  return root;
}

// Minimal static forest-style plot: one line per row, point at Cohen's d
// with a 1.96 SE whisker when the bootstrap ran.
inline std::string forest_svg(const std::vector<result_row>& rows,
                              const std::string& title) {
  double lo = -1.0, hi = 1.0;
  for (const result_row& r : rows) {
    if (std::isnan(r.cohen_d)) continue;
    const double w = std::isnan(r.se_cohen_d) ? 0.0 : 1.96 * r.se_cohen_d;
    lo = std::min(lo, r.cohen_d - w - 0.1);
    hi = std::max(hi, r.cohen_d + w + 0.1);
  }
  const int width = 720, row_h = 22, left = 220, top = 40;
  const int height = top + row_h * static_cast<int>(rows.size()) + 30;
  auto xmap = [&](double v) {
    return left + (v - lo) / (hi - lo) * (width - left - 30);
  };
  std::string svg;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns='http://www.w3.org/2000/svg' width='%d' height='%d' "
                "font-family='monospace' font-size='12'>\n",
                width, height);
  svg += buf;
  svg += "<text x='10' y='20' font-size='14'>" + title + "</text>\n";
  std::snprintf(buf, sizeof buf,
                "<line x1='%.1f' y1='%d' x2='%.1f' y2='%d' stroke='#888' "
                "stroke-dasharray='4,3'/>\n",
                xmap(0.0), top - 10, xmap(0.0), height - 20);
  svg += buf;
  int y = top;
  for (const result_row& r : rows) {
    const std::string label = r.study_id +
                              (r.arm_label.empty() ? "" : "/" + r.arm_label) +
                              " r=" + detail::fmt(r.r_hyp);
    std::snprintf(buf, sizeof buf, "<text x='10' y='%d'>%s</text>\n", y + 4,
                  label.c_str());
    svg += buf;
    if (!std::isnan(r.cohen_d)) {
      if (!std::isnan(r.se_cohen_d)) {
        std::snprintf(buf, sizeof buf,
                      "<line x1='%.1f' y1='%d' x2='%.1f' y2='%d' stroke='#369'/>\n",
                      xmap(r.cohen_d - 1.96 * r.se_cohen_d), y,
                      xmap(r.cohen_d + 1.96 * r.se_cohen_d), y);
        svg += buf;
      }
      std::snprintf(buf, sizeof buf,
                    "<circle cx='%.1f' cy='%d' r='4' fill='#369'/>\n",
                    xmap(r.cohen_d), y);
      svg += buf;
    }
    y += row_h;
  }
  std::snprintf(buf, sizeof buf,
                "<text x='%.1f' y='%d'>%.2f</text><text x='%.1f' y='%d'>0</text>"
                "<text x='%.1f' y='%d'>%.2f</text>\n",
                xmap(lo) - 10, height - 5, lo, xmap(0.0) - 3, height - 5,
                xmap(hi) - 20, height - 5, hi);
  svg += buf;
  svg += "</svg>\n";
  return svg;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

}  // namespace frailmeta
