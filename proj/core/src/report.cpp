#include "didkit/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "didkit/errors.hpp"
#include "didkit/stats_math.hpp"

namespace didkit {

using nlohmann::json;

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string ci_method_name(CiMethod m) {
  switch (m) {
    case CiMethod::analytic: return "analytic";
    case CiMethod::bootstrap_percentile: return "bootstrap-percentile";
    case CiMethod::bootstrap_normal: return "bootstrap-normal";
  }
  return "";
}

json ci_json(const ConfidenceInterval& ci) {
  json j;
  j["se"] = ci.se;
  j["ci"] = {ci.lower, ci.upper};
  j["level"] = ci.level;
  j["method"] = ci_method_name(ci.method);
  if (ci.degenerate_variance) j["degenerate_variance"] = true;
  return j;
}

}  // namespace

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw validation_error("cannot open input file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string bytes = ss.str();
  std::uint64_t h = fnv1a64(bytes.data(), bytes.size());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

json manifest_json(const RunManifest& m) {
  json j;
  j["subcommand"] = m.subcommand;
  j["input_path"] = m.input_path;
  j["output_dir"] = m.output_dir;
  j["tool_version"] = m.tool_version;
  j["input_hash"] = m.input_hash;
  j["columns"] = {{"group", m.columns.group},
                  {"time", m.columns.time},
                  {"outcome", m.columns.outcome},
                  {"treatment", m.columns.treatment},
                  {"weight", m.columns.weight}};
  j["discount"] = m.discount;
  j["treatment_tolerance"] = m.treatment_tolerance;
  j["arm"] = m.arm;
  j["trim_k"] = m.trim_k;
  j["bootstrap_replications"] = m.bootstrap_replications;
  j["seed"] = m.seed;
  j["alpha"] = m.alpha;
  return j;
}

namespace {

// Coordinate layout of the joint bootstrap statistic.
struct StatLayout {
  std::vector<int> effect_keys;   // horizons (when effects need bootstrap se)
  bool with_aggregate = false;
  std::vector<int> trimmed_keys;
  std::vector<int> placebo_keys;  // always present when placebos exist

  std::size_t size() const {
    return effect_keys.size() + (with_aggregate ? 1 : 0) + trimmed_keys.size() +
           placebo_keys.size();
  }
};

std::vector<double> evaluate_layout(const Panel& panel, Arm arm,
                                    const StatLayout& layout) {
  std::vector<double> v;
  v.reserve(layout.size());
  if (!layout.effect_keys.empty() || layout.with_aggregate ||
      !layout.trimmed_keys.empty()) {
    EventStudyResult r = event_study(panel, arm);
    for (int k : layout.effect_keys) {
      auto it = r.horizons.find(k);
      if (it == r.horizons.end()) throw estimation_error("horizon missing in resample");
      v.push_back(it->second.estimate);
    }
    if (layout.with_aggregate) v.push_back(r.aggregate);
    for (int k : layout.trimmed_keys) {
      auto it = r.trimmed.find(k);
      if (it == r.trimmed.end()) throw estimation_error("trim depth missing in resample");
      v.push_back(it->second);
    }
  }
  if (!layout.placebo_keys.empty()) {
    PlaceboResult p = placebo_study(panel, arm);
    for (int k : layout.placebo_keys) {
      auto it = p.horizons.find(k);
      if (it == p.horizons.end()) throw estimation_error("placebo missing in resample");
      v.push_back(it->second.estimate);
    }
  }
  return v;
}

ConfidenceInterval normal_boot_ci(double estimate, double se, double alpha) {
  ConfidenceInterval ci;
  ci.estimate = estimate;
  ci.se = se;
  ci.level = 1.0 - alpha;
  ci.method = CiMethod::bootstrap_normal;
  double z = normal_quantile(1.0 - alpha / 2.0);
  ci.lower = estimate - z * se;
  ci.upper = estimate + z * se;
  return ci;
}

}  // namespace

EventStudyReport build_estimate_report(const Panel& panel, const RunManifest& manifest) {
  EventStudyReport rep;
  rep.manifest = manifest;
  rep.group_names = panel.groups;
  const Arm arm = parse_arm(manifest.arm);
  const double alpha = manifest.alpha;

  rep.result = event_study(panel, arm);
  rep.placebos = placebo_study(panel, arm);

  if (manifest.trim_k >= 0 && !rep.result.trimmed.count(manifest.trim_k)) {
    throw validation_error("trim horizon " + std::to_string(manifest.trim_k) +
                           " out of range: estimable horizons are 0.." +
                           std::to_string(rep.result.max_horizon));
  }
  if (rep.result.plus_arm_empty) {
    rep.warnings.push_back("initially-untreated arm empty; combined equals the "
                           "initially-treated arm");
  }
  if (rep.result.minus_arm_empty) {
    rep.warnings.push_back("initially-treated arm empty; combined equals the "
                           "initially-untreated arm");
  }
  if (rep.result.excluded_cells > 0) {
    rep.warnings.push_back(std::to_string(rep.result.excluded_cells) +
                           " non-monotone dose-path cells excluded from aggregation");
  }
  if (rep.placebos.max_horizon < 0) {
    rep.warnings.push_back("no placebos computable: all switchers switch at period 2");
  }

  // Analytic large-G inference applies to the initially-untreated arm when the
  // estimate is the plain mass-weighted average (no dropped or sign-flipped
  // cells); everything else rests on the group bootstrap.
  const bool analytic = arm == Arm::plus && rep.result.excluded_cells == 0 &&
                        rep.result.negative_path_cells == 0;

  StatLayout layout;
  if (!analytic) {
    for (const auto& [h, e] : rep.result.horizons) layout.effect_keys.push_back(h);
    layout.with_aggregate = true;
    for (const auto& [k, v] : rep.result.trimmed) layout.trimmed_keys.push_back(k);
  }
  for (const auto& [h, e] : rep.placebos.horizons) layout.placebo_keys.push_back(h);

  if (analytic) {
    DesignStats stats = design_stats(panel);
    for (const auto& [h, e] : rep.result.horizons) {
      rep.horizon_ci[h] = analytic_ci_horizon(panel, stats, h, alpha);
    }
    rep.aggregate_ci = analytic_ci_aggregate(panel, stats, alpha);
    for (const auto& [k, v] : rep.result.trimmed) {
      rep.trimmed_ci[k] = analytic_ci_trimmed(panel, stats, k, alpha);
    }
  }

  if (layout.size() > 0 && manifest.bootstrap_replications >= 2) {
    BootstrapSpec spec;
    spec.replications = manifest.bootstrap_replications;
    spec.seed = manifest.seed;
    try {
      BootstrapResult boot = cluster_bootstrap(
          panel, spec,
          [&](const Panel& resample) { return evaluate_layout(resample, arm, layout); },
          alpha);
      std::size_t at = 0;
      for (int h : layout.effect_keys) {
        rep.horizon_ci[h] =
            normal_boot_ci(rep.result.horizons.at(h).estimate, boot.se[at++], alpha);
      }
      if (layout.with_aggregate) {
        rep.aggregate_ci = normal_boot_ci(rep.result.aggregate, boot.se[at++], alpha);
      }
      for (int k : layout.trimmed_keys) {
        rep.trimmed_ci[k] =
            normal_boot_ci(rep.result.trimmed.at(k), boot.se[at++], alpha);
      }
      if (!layout.placebo_keys.empty()) {
        std::vector<double> placebo_values;
        Eigen::MatrixXd cov(layout.placebo_keys.size(), layout.placebo_keys.size());
        for (std::size_t i = 0; i < layout.placebo_keys.size(); ++i) {
          int h = layout.placebo_keys[i];
          rep.placebo_ci[h] =
              normal_boot_ci(rep.placebos.horizons.at(h).estimate, boot.se[at + i], alpha);
          placebo_values.push_back(rep.placebos.horizons.at(h).estimate);
          for (std::size_t j = 0; j < layout.placebo_keys.size(); ++j) {
            cov(i, j) = boot.covariance(at + i, at + j);
          }
        }
        rep.joint_test = joint_placebo_test(placebo_values, cov,
                                            static_cast<int>(boot.replicates.size()));
        rep.has_joint_test = true;
      }
      if (boot.invalid_replicates > 0) {
        rep.warnings.push_back(std::to_string(boot.invalid_replicates) +
                               " bootstrap replicates dropped as undefined");
      }
    } catch (const estimation_error& e) {
      rep.warnings.push_back(std::string("bootstrap failed: ") + e.what());
    }
  }
  return rep;
}

namespace {

SeriesRow base_row(const std::string& arm, const std::string& series, int key, double x) {
  SeriesRow row;
  row.arm = arm;
  row.series = series;
  row.key = key;
  row.x = x;
  row.estimate = kNan;
  row.first_stage = kNan;
  row.mass = kNan;
  row.se = kNan;
  row.ci_lower = kNan;
  row.ci_upper = kNan;
  return row;
}

void attach_ci(SeriesRow& row, const std::map<int, ConfidenceInterval>& cis, int key) {
  auto it = cis.find(key);
  if (it == cis.end()) return;
  row.se = it->second.se;
  row.ci_lower = it->second.lower;
  row.ci_upper = it->second.upper;
  row.method = ci_method_name(it->second.method);
}

}  // namespace

std::vector<SeriesRow> placebo_rows(const EventStudyReport& report) {
  std::vector<SeriesRow> rows;
  const std::string arm = report.manifest.arm;
  for (auto it = report.placebos.horizons.rbegin(); it != report.placebos.horizons.rend();
       ++it) {
    SeriesRow row = base_row(arm, "placebo", it->first, -2.0 - it->first);
    row.estimate = it->second.estimate;
    row.mass = it->second.mass;
    row.n_groups = static_cast<int>(it->second.groups.size());
    attach_ci(row, report.placebo_ci, it->first);
    rows.push_back(row);
  }
  // The reference period: normalized to zero by construction.
  SeriesRow ref = base_row(arm, "reference", -1, -1.0);
  ref.estimate = 0.0;
  rows.push_back(ref);
  return rows;
}

std::vector<SeriesRow> report_rows(const EventStudyReport& report) {
  std::vector<SeriesRow> rows = placebo_rows(report);
  const std::string arm = report.manifest.arm;

  for (const auto& [h, eff] : report.result.horizons) {
    SeriesRow row = base_row(arm, "effect", h, static_cast<double>(h));
    row.estimate = eff.estimate;
    row.first_stage = eff.first_stage;
    row.mass = eff.mass;
    row.n_groups = static_cast<int>(eff.groups.size());
    attach_ci(row, report.horizon_ci, h);
    rows.push_back(row);
  }

  std::set<int> used;
  double total_mass = 0.0;
  for (const auto& [h, eff] : report.result.horizons) {
    used.insert(eff.groups.begin(), eff.groups.end());
    total_mass += eff.mass;
  }
  SeriesRow agg = base_row(arm, "aggregate", report.result.max_horizon, kNan);
  agg.estimate = report.result.aggregate;
  agg.mass = total_mass;
  agg.n_groups = static_cast<int>(used.size());
  if (report.aggregate_ci) {
    agg.se = report.aggregate_ci->se;
    agg.ci_lower = report.aggregate_ci->lower;
    agg.ci_upper = report.aggregate_ci->upper;
    agg.method = ci_method_name(report.aggregate_ci->method);
  }
  rows.push_back(agg);

  for (const auto& [k, v] : report.result.trimmed) {
    SeriesRow row = base_row(arm, "trimmed", k, kNan);
    row.estimate = v;
    attach_ci(row, report.trimmed_ci, k);
    rows.push_back(row);
  }
  return rows;
}

std::string rows_to_csv(const std::vector<SeriesRow>& rows) {
  std::string out =
      "arm,series,key,x,estimate,first_stage,mass,n_groups,se,ci_lower,ci_upper,method\n";
  for (const auto& r : rows) {
    out += r.arm + ',' + r.series + ',' + std::to_string(r.key) + ',' +
           format_double(r.x) + ',' + format_double(r.estimate) + ',' +
           format_double(r.first_stage) + ',' + format_double(r.mass) + ',' +
           std::to_string(r.n_groups) + ',' + format_double(r.se) + ',' +
           format_double(r.ci_lower) + ',' + format_double(r.ci_upper) + ',' +
           r.method + '\n';
  }
  return out;
}

std::vector<SeriesRow> rows_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw validation_error("empty results table");
  std::vector<SeriesRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 12) throw validation_error("results table row has wrong arity");
    SeriesRow r;
    r.arm = f[0];
    r.series = f[1];
    r.key = static_cast<int>(parse_double(f[2], "key"));
    r.x = parse_double(f[3], "x");
    r.estimate = parse_double(f[4], "estimate");
    r.first_stage = parse_double(f[5], "first_stage");
    r.mass = parse_double(f[6], "mass");
    r.n_groups = static_cast<int>(parse_double(f[7], "n_groups"));
    r.se = parse_double(f[8], "se");
    r.ci_lower = parse_double(f[9], "ci_lower");
    r.ci_upper = parse_double(f[10], "ci_upper");
    r.method = f[11];
    rows.push_back(r);
  }
  return rows;
}

namespace {

json horizon_json(const EventStudyReport& rep, int h, const HorizonEffect& eff) {
  json j;
  j["horizon"] = h;
  j["estimate"] = eff.estimate;
  j["first_stage"] = eff.first_stage;
  j["mass"] = eff.mass;
  json names = json::array();
  for (int g : eff.groups) names.push_back(rep.group_names[g]);
  j["groups"] = names;
  auto it = rep.horizon_ci.find(h);
  if (it != rep.horizon_ci.end()) j.update(ci_json(it->second));
  return j;
}

json placebo_json_entry(const EventStudyReport& rep, int h, const PlaceboEffect& eff) {
  json j;
  j["horizon"] = h;
  j["x"] = -2.0 - h;
  j["estimate"] = eff.estimate;
  j["mass"] = eff.mass;
  json names = json::array();
  for (int g : eff.groups) names.push_back(rep.group_names[g]);
  j["groups"] = names;
  auto it = rep.placebo_ci.find(h);
  if (it != rep.placebo_ci.end()) j.update(ci_json(it->second));
  return j;
}

json joint_json(const JointTest& t) {
  json j;
  j["statistic"] = t.statistic;
  j["p_value"] = t.p_value;
  j["dof"] = t.dof;
  j["pseudo_inverse"] = t.pseudo_inverse;
  if (t.underpowered_covariance) j["underpowered_covariance"] = true;
  return j;
}

}  // namespace

json placebo_report_json(const EventStudyReport& rep) {
  json j;
  j["manifest"] = manifest_json(rep.manifest);
  j["arm"] = rep.manifest.arm;
  j["max_horizon"] = rep.placebos.max_horizon;
  json entries = json::array();
  for (const auto& [h, eff] : rep.placebos.horizons) {
    entries.push_back(placebo_json_entry(rep, h, eff));
  }
  j["placebos"] = entries;
  if (rep.has_joint_test) j["joint_test"] = joint_json(rep.joint_test);
  if (!rep.warnings.empty()) j["warnings"] = rep.warnings;
  return j;
}

json report_json(const EventStudyReport& rep) {
  json j;
  j["manifest"] = manifest_json(rep.manifest);
  j["arm"] = rep.manifest.arm;
  j["max_horizon"] = rep.result.max_horizon;
  j["excluded_cells"] = rep.result.excluded_cells;

  json horizons = json::array();
  for (const auto& [h, eff] : rep.result.horizons) {
    horizons.push_back(horizon_json(rep, h, eff));
  }
  j["horizons"] = horizons;

  json placebos = json::array();
  for (const auto& [h, eff] : rep.placebos.horizons) {
    placebos.push_back(placebo_json_entry(rep, h, eff));
  }
  j["placebos"] = placebos;
  if (rep.has_joint_test) j["joint_placebo_test"] = joint_json(rep.joint_test);

  json agg;
  agg["estimate"] = rep.result.aggregate;
  if (rep.aggregate_ci) agg.update(ci_json(*rep.aggregate_ci));
  j["aggregate"] = agg;

  json trimmed = json::array();
  for (const auto& [k, v] : rep.result.trimmed) {
    json t;
    t["k"] = k;
    t["estimate"] = v;
    auto it = rep.trimmed_ci.find(k);
    if (it != rep.trimmed_ci.end()) t.update(ci_json(it->second));
    trimmed.push_back(t);
  }
  j["trimmed"] = trimmed;
  if (!rep.warnings.empty()) j["warnings"] = rep.warnings;
  return j;
}

json weight_report_json(const WeightReport& report, const RunManifest& manifest) {
  json j;
  j["manifest"] = manifest_json(manifest);
  j["spec"] = twfe_spec_name(report.spec);
  j["parameter"] = report.parameter;
  json fams = json::array();
  for (const auto& fam : report.families) {
    json f;
    f["target"] = fam.target;
    f["coefficient"] = fam.coefficient;
    json cells = json::array();
    for (const auto& c : fam.weights) {
      cells.push_back({{"g", c.g}, {"t", c.t}, {"weight", c.weight}});
    }
    f["weights"] = cells;
    json sums = json::object();
    for (const auto& [lag, s] : fam.term_summaries) {
      sums[std::to_string(lag)] = {{"n_positive", s.n_positive},
                                   {"n_negative", s.n_negative},
                                   {"sum_positive", s.sum_positive},
                                   {"sum_negative", s.sum_negative},
                                   {"total", s.total},
                                   {"min_weight", s.min_weight}};
    }
    f["term_summaries"] = sums;
    fams.push_back(f);
  }
  j["families"] = fams;
  j["notes"] = report.notes;
  return j;
}

std::string weight_report_csv(const WeightReport& report, const Panel& panel) {
  std::string out = "spec,target,group,period,weight\n";
  const std::string spec = twfe_spec_name(report.spec);
  for (const auto& fam : report.families) {
    for (const auto& c : fam.weights) {
      out += spec + ',' + std::to_string(fam.target) + ',' + panel.groups[c.g] + ',';
      out += c.t > 0 ? std::to_string(panel.periods[c.t - 1]) : std::string();
      out += ',' + format_double(c.weight) + '\n';
    }
  }
  return out;
}

std::string weight_report_summary(const WeightReport& report) {
  std::ostringstream out;
  out << "TWFE decomposition (" << twfe_spec_name(report.spec) << ")\n";
  for (const auto& fam : report.families) {
    out << "target " << fam.target << ": coefficient " << format_double(fam.coefficient)
        << "\n";
    for (const auto& [lag, s] : fam.term_summaries) {
      out << "  weights on lag " << lag << ": " << s.n_positive
          << " effects receive a positive weight (sum " << format_double(s.sum_positive)
          << "), " << s.n_negative << " a negative weight (sum "
          << format_double(s.sum_negative) << "); total " << format_double(s.total)
          << ", min " << format_double(s.min_weight) << "\n";
    }
  }
  for (const auto& note : report.notes) out << "note: " << note << "\n";
  return out.str();
}

namespace {

json summary_json(const EstimandSummary& s) {
  json j;
  j["truth"] = s.truth;
  j["mc_mean"] = s.mc_mean;
  j["mc_se"] = s.mc_se;
  j["sd"] = s.sd;
  j["bias"] = s.bias;
  if (s.coverage >= 0) j["coverage"] = s.coverage;
  j["replications"] = s.replications;
  return j;
}

void summary_csv_row(std::string& out, const std::string& kind, int key,
                     const EstimandSummary& s) {
  out += kind + ',' + std::to_string(key) + ',' + format_double(s.truth) + ',' +
         format_double(s.mc_mean) + ',' + format_double(s.mc_se) + ',' +
         format_double(s.sd) + ',' + format_double(s.bias) + ',' +
         format_double(s.coverage >= 0 ? s.coverage : kNan) + ',' +
         std::to_string(s.replications) + '\n';
}

}  // namespace

json sim_report_json(const SimReport& report, const RunManifest& manifest) {
  json j;
  j["manifest"] = manifest_json(manifest);
  j["groups"] = report.n_groups;
  j["periods"] = report.n_periods;
  j["max_horizon"] = report.max_horizon;
  j["replications"] = report.replications;
  json horizons = json::object();
  for (const auto& [l, s] : report.horizon) horizons[std::to_string(l)] = summary_json(s);
  j["horizon_effects"] = horizons;
  j["aggregate"] = summary_json(report.aggregate);
  json placebos = json::object();
  for (const auto& [l, s] : report.placebo) placebos[std::to_string(l)] = summary_json(s);
  j["placebos"] = placebos;
  if (report.placebo_tests > 0) {
    j["placebo_joint_rejection_rate"] = report.placebo_rejection_rate;
    j["placebo_tests"] = report.placebo_tests;
  }
  if (!report.twfe_event_study.empty()) {
    json t = json::object();
    for (const auto& [p, s] : report.twfe_event_study) {
      t[std::to_string(p)] = summary_json(s);
    }
    j["twfe_event_study"] = t;
  }
  if (!report.implied_gap.empty()) {
    json t = json::object();
    for (const auto& [l, s] : report.implied_gap) t[std::to_string(l)] = summary_json(s);
    j["implied_event_study_gap"] = t;
  }
  j["assertion_failures"] = report.assertion_failures;
  return j;
}

std::string sim_report_csv(const SimReport& report) {
  std::string out = "kind,key,truth,mc_mean,mc_se,sd,bias,coverage,replications\n";
  for (const auto& [l, s] : report.horizon) summary_csv_row(out, "effect", l, s);
  summary_csv_row(out, "aggregate", report.max_horizon, report.aggregate);
  for (const auto& [l, s] : report.placebo) summary_csv_row(out, "placebo", l, s);
  for (const auto& [p, s] : report.twfe_event_study) {
    summary_csv_row(out, "twfe_coefficient", p, s);
  }
  for (const auto& [l, s] : report.implied_gap) {
    summary_csv_row(out, "implied_gap", l, s);
  }
  if (report.placebo_tests > 0) {
    out += "placebo_joint_rejection,0,nan," +
           format_double(report.placebo_rejection_rate) + ",nan,nan,nan,nan," +
           std::to_string(report.placebo_tests) + '\n';
  }
  return out;
}

}  // namespace didkit
