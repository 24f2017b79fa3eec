#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "frailmeta/study.hpp"

namespace frailmeta {

inline constexpr int kSchemaVersion = 1;

struct descriptor_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline criteria_tag parse_criteria_tag(const std::string& s) {
  static const std::map<std::string, criteria_tag> table = {
      {"default", criteria_tag::none},
      {"at_least_one_baseline", criteria_tag::at_least_one_baseline},
      {"zero_baseline", criteria_tag::zero_baseline},
      {"recent_given_lifetime", criteria_tag::recent_given_lifetime},
      {"two_in_year_one_recent", criteria_tag::two_in_year_one_recent},
      {"event_at_enrollment_with_prior", criteria_tag::event_at_enrollment_with_prior},
      {"event_at_enrollment", criteria_tag::event_at_enrollment},
      {"first_harm_recent", criteria_tag::first_harm_recent},
      {"median_iqr_baseline", criteria_tag::median_iqr_baseline},
  };
  const auto it = table.find(s);
  if (it == table.end())
    throw descriptor_error("unknown criteria variant '" + s + "'");
  return it->second;
}

inline std::string criteria_tag_name(criteria_tag t) {
  switch (t) {
    case criteria_tag::none: return "default";
    case criteria_tag::at_least_one_baseline: return "at_least_one_baseline";
    case criteria_tag::zero_baseline: return "zero_baseline";
    case criteria_tag::recent_given_lifetime: return "recent_given_lifetime";
    case criteria_tag::two_in_year_one_recent: return "two_in_year_one_recent";
    case criteria_tag::event_at_enrollment_with_prior:
      return "event_at_enrollment_with_prior";
    case criteria_tag::event_at_enrollment: return "event_at_enrollment";
    case criteria_tag::first_harm_recent: return "first_harm_recent";
    case criteria_tag::median_iqr_baseline: return "median_iqr_baseline";
  }
  return "default";
}

inline outcome_kind parse_outcome(const std::string& s) {
  if (s == "attempt") return outcome_kind::attempt;
  if (s == "NSSI" || s == "nssi") return outcome_kind::nssi;
  if (s == "SHB" || s == "shb") return outcome_kind::shb;
  if (s == "ideation_binary") return outcome_kind::ideation_binary;
  throw descriptor_error("unknown outcome '" + s + "'");
}

inline std::string outcome_name(outcome_kind k) {
  switch (k) {
    case outcome_kind::attempt: return "attempt";
    case outcome_kind::nssi: return "nssi";
    case outcome_kind::shb: return "shb";
    case outcome_kind::ideation_binary: return "ideation_binary";
  }
  return "attempt";
}

template <typename T>
T require(const nlohmann::json& j, const std::string& key,
          const std::string& where) {
  if (!j.contains(key))
    throw descriptor_error(where + ": missing required field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw descriptor_error(where + ": field '" + key + "' has the wrong type");
  }
}

template <typename T>
T optional_or(const nlohmann::json& j, const std::string& key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

inline shb_window parse_window(const nlohmann::json& j, const std::string& where) {
  const std::string type = require<std::string>(j, "type", where);
  if (type == "fixed") return fixed_window(require<double>(j, "years", where));
  if (type == "lifetime")
    return lifetime_window(require<double>(j, "min_age", where),
                           require<double>(j, "max_age", where),
                           require<double>(j, "mean_age", where),
                           require<double>(j, "sd_age", where),
                           optional_or<double>(j, "risk_onset_age", 10.0));
  throw descriptor_error(where + ": window type must be 'fixed' or 'lifetime'");
}

inline nlohmann::json window_to_json(const shb_window& w) {
  nlohmann::json j;
  if (std::holds_alternative<fixed_window>(w)) {
    j["type"] = "fixed";
    j["years"] = std::get<fixed_window>(w).years;
  } else {
    const lifetime_window& lw = std::get<lifetime_window>(w);
    j["type"] = "lifetime";
    j["min_age"] = lw.min_age;
    j["max_age"] = lw.max_age;
    j["mean_age"] = lw.mean_age;
    j["sd_age"] = lw.sd_age;
    j["risk_onset_age"] = lw.risk_onset_age;
  }
  return j;
}

inline study_spec parse_study(const nlohmann::json& j, std::size_t index) {
  const std::string where =
      "study #" + std::to_string(index + 1) +
      (j.contains("study_id") && j.at("study_id").is_string()
           ? " (" + j.at("study_id").get<std::string>() + ")"
           : "");
  study_spec s;
  s.study_id = require<std::string>(j, "study_id", where);
  s.arm_label = optional_or<std::string>(j, "arm_label", "");
  s.outcome = parse_outcome(optional_or<std::string>(j, "outcome", "attempt"));
  s.n_con = require<long>(j, "n_con", where);
  s.n_exp = require<long>(j, "n_exp", where);
  s.q_base = optional_or<double>(j, "q_base", kNaN);
  s.q_flup_con = optional_or<double>(j, "q_flup_con", kNaN);
  s.q_flup_exp = optional_or<double>(j, "q_flup_exp", kNaN);
  if (!j.contains("baseline_window"))
    throw descriptor_error(where + ": missing required field 'baseline_window'");
  s.baseline_window = parse_window(j.at("baseline_window"), where);
  s.flup_years_con = require<double>(j, "flup_years_con", where);
  s.flup_years_exp = require<double>(j, "flup_years_exp", where);

  if (j.contains("criteria")) {
    const nlohmann::json& c = j.at("criteria");
    s.criteria.tag = parse_criteria_tag(require<std::string>(c, "variant", where));
    s.criteria.delta = optional_or<double>(c, "delta", 0.0);
    s.criteria.delta1 = optional_or<double>(c, "delta1", 0.0);
    s.criteria.delta2 = optional_or<double>(c, "delta2", 0.0);
    s.criteria.default_rate = optional_or<double>(c, "default_rate", 0.0);
  }
  if (j.contains("aux")) {
    const nlohmann::json& a = j.at("aux");
    s.aux.mean_base_count = optional_or<double>(a, "mean_base_count", kNaN);
    s.aux.mean_flup_con = optional_or<double>(a, "mean_flup_con", kNaN);
    s.aux.mean_flup_exp = optional_or<double>(a, "mean_flup_exp", kNaN);
    s.aux.median_base = optional_or<double>(a, "median_base", kNaN);
    s.aux.iqr_low = optional_or<double>(a, "iqr_low", kNaN);
    s.aux.iqr_high = optional_or<double>(a, "iqr_high", kNaN);
    s.aux.rate_flup_con = optional_or<double>(a, "rate_flup_con", kNaN);
    s.aux.rate_flup_exp = optional_or<double>(a, "rate_flup_exp", kNaN);
    s.aux.n_screened = optional_or<double>(a, "n_screened", kNaN);
    s.aux.n_excluded_history = optional_or<double>(a, "n_excluded_history", kNaN);
  }

  try {
    s.validate();
  } catch (const std::exception& e) {
    throw descriptor_error(where + ": " + e.what());
  }
  return s;
}

}  // namespace detail

inline std::vector<study_spec> parse_descriptors_json(const std::string& text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw descriptor_error(std::string("descriptor is not valid JSON: ") + e.what());
  }
  if (!root.is_object() || !root.contains("studies"))
    throw descriptor_error("descriptor must be an object with a 'studies' array");
  const int ver = detail::optional_or<int>(root, "schema_version", kSchemaVersion);
  if (ver != kSchemaVersion)
    throw descriptor_error("unsupported schema_version " + std::to_string(ver));

  std::vector<study_spec> out;
  std::map<std::string, int> seen;
  const nlohmann::json& arr = root.at("studies");
  if (!arr.is_array()) throw descriptor_error("'studies' must be an array");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    study_spec s = detail::parse_study(arr.at(i), i);
    const std::string key = s.study_id + "/" + s.arm_label;
    if (++seen[key] > 1)
      throw descriptor_error("duplicate study_id/arm_label '" + key + "'");
    out.push_back(std::move(s));
  }
  return out;
}

// Flat CSV form, restricted to the default variant:
// study_id,outcome,n_con,n_exp,q_base,q_flup_con,q_flup_exp,base_years,flup_years_con,flup_years_exp
inline std::vector<study_spec> parse_descriptors_csv(const std::string& text) {
  std::vector<study_spec> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, int> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 && line.rfind("study_id", 0) == 0) continue;  // header
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 10)
      throw descriptor_error("line " + std::to_string(lineno) +
                             ": expected 10 comma-separated fields");
    try {
      study_spec s;
      s.study_id = f[0];
      s.outcome = detail::parse_outcome(f[1]);
      s.n_con = std::stol(f[2]);
      s.n_exp = std::stol(f[3]);
      s.q_base = std::stod(f[4]);
      s.q_flup_con = std::stod(f[5]);
      s.q_flup_exp = std::stod(f[6]);
      s.baseline_window = fixed_window(std::stod(f[7]));
      s.flup_years_con = std::stod(f[8]);
      s.flup_years_exp = std::stod(f[9]);
      s.validate();
      if (++seen[s.study_id] > 1)
        throw descriptor_error("duplicate study_id '" + s.study_id + "'");
      out.push_back(std::move(s));
    } catch (const descriptor_error&) {
      throw;
    } catch (const std::exception& e) {
      throw descriptor_error("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<study_spec> load_descriptors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw descriptor_error("cannot open descriptor file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv")
    return parse_descriptors_csv(text);
  return parse_descriptors_json(text);
}

inline nlohmann::json study_to_json(const study_spec& s) {
  nlohmann::json j;
  j["study_id"] = s.study_id;
  if (!s.arm_label.empty()) j["arm_label"] = s.arm_label;
  j["outcome"] = detail::outcome_name(s.outcome);
  j["n_con"] = s.n_con;
  j["n_exp"] = s.n_exp;
  auto set_opt = [&](const char* key, double v) {
    if (!std::isnan(v)) j[key] = v;
  };
  set_opt("q_base", s.q_base);
  set_opt("q_flup_con", s.q_flup_con);
  set_opt("q_flup_exp", s.q_flup_exp);
  j["baseline_window"] = detail::window_to_json(s.baseline_window);
  j["flup_years_con"] = s.flup_years_con;
  j["flup_years_exp"] = s.flup_years_exp;
  nlohmann::json c;
  c["variant"] = detail::criteria_tag_name(s.criteria.tag);
  if (s.criteria.delta > 0.0) c["delta"] = s.criteria.delta;
  if (s.criteria.delta1 > 0.0) c["delta1"] = s.criteria.delta1;
  if (s.criteria.delta2 > 0.0) c["delta2"] = s.criteria.delta2;
  if (s.criteria.default_rate > 0.0) c["default_rate"] = s.criteria.default_rate;
  j["criteria"] = c;
  nlohmann::json a;
  auto aux_opt = [&](const char* key, double v) {
    if (!std::isnan(v)) a[key] = v;
  };
  aux_opt("mean_base_count", s.aux.mean_base_count);
  aux_opt("mean_flup_con", s.aux.mean_flup_con);
  aux_opt("mean_flup_exp", s.aux.mean_flup_exp);
  aux_opt("median_base", s.aux.median_base);
  aux_opt("iqr_low", s.aux.iqr_low);
  aux_opt("iqr_high", s.aux.iqr_high);
  aux_opt("rate_flup_con", s.aux.rate_flup_con);
  aux_opt("rate_flup_exp", s.aux.rate_flup_exp);
  aux_opt("n_screened", s.aux.n_screened);
  aux_opt("n_excluded_history", s.aux.n_excluded_history);
  if (!a.empty()) j["aux"] = a;
  return j;
}

}  // namespace frailmeta
